"""Shared fixtures and frame-synthesis helpers for the test suite."""

import numpy as np
import pytest

from otfslink.channel import evaluate_tf_response, sample_paths
from otfslink.coding import CodingChain, make_interleaver, qpsk
from otfslink.grids import spread
from otfslink.simulate import SimConfig, noise_variance_from_ebn0


@pytest.fixture(scope="session")
def qpsk_const():
    return qpsk()


@pytest.fixture(scope="session")
def frame_factory(qpsk_const):
    """Factory producing one fully synthesized frame.

    Draws follow the harness order (info bits, permutation, paths, noise)
    from a seed pair, so frames here match `run_frame` frames exactly.
    """

    def make(
        frame_index,
        velocity_kmh=200.0,
        ebn0_db=8.0,
        master_seed=1,
        spreading="dsft",
        **cfg_overrides,
    ):
        cfg = SimConfig(
            velocities_kmh=(velocity_kmh,),
            ebn0_db_points=(ebn0_db,),
            frames_per_point=1,
            **cfg_overrides,
        )
        geom = cfg.geometry(velocity_kmh)
        sigma2 = noise_variance_from_ebn0(ebn0_db)
        rng = np.random.default_rng([master_seed, int(frame_index)])
        shape = cfg.grid_shape
        info = rng.integers(0, 2, size=cfg.bits_per_frame).astype(np.int8)
        perm = make_interleaver(shape[0] * shape[1] * 2, rng)
        chain = CodingChain(shape, qpsk_const, perm)
        data_grid = chain.encode_to_grid(info)
        paths = sample_paths(geom, cfg.rms_delay_spread_s, cfg.num_paths, rng)
        g = evaluate_tf_response(paths, geom)
        tx = spread(data_grid) if spreading == "dsft" else data_grid
        draw = rng.standard_normal((2,) + shape)
        noise = (draw[0] + 1j * draw[1]) * np.sqrt(sigma2 / 2.0)
        received = g * tx + noise
        return {
            "cfg": cfg,
            "geometry": geom,
            "sigma2": sigma2,
            "info_bits": info,
            "chain": chain,
            "data_grid": data_grid,
            "paths": paths,
            "tf_response": g,
            "received": received,
        }

    return make
