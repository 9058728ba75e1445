"""Quick invariant battery behind the ``selftest`` CLI subcommand.

Each check is cheap and deterministic; together they exercise the
transform pair, the dense operators, the coding chain, the detector in
both domains, and harness reproducibility.  Failures are reported per
check and the battery keeps going so one run shows everything broken.
"""

from dataclasses import replace

import numpy as np

from .channel import evaluate_tf_response, sample_paths
from .coding import CodingChain, bcjr_decode, conv_encode, make_interleaver, qpsk
from .grids import (
    build_dd_channel_operator,
    build_spreading_matrix,
    despread,
    dsft,
    idsft,
    spread,
)
from .simulate import SimConfig, run_frame


def _check_transforms(rng):
    grid = rng.standard_normal((12, 10)) + 1j * rng.standard_normal((12, 10))
    if not np.allclose(idsft(dsft(grid)), grid, atol=1e-12):
        return "dsft/idsft round trip failed"
    if not np.allclose(despread(spread(grid)), grid, atol=1e-12):
        return "spread/despread round trip failed"
    s = build_spreading_matrix(6, 8)
    if not np.allclose(s.conj().T @ s, np.eye(48), atol=1e-10):
        return "spreading matrix is not unitary"
    return None


def _check_operator(rng):
    g = rng.standard_normal((6, 8)) + 1j * rng.standard_normal((6, 8))
    d = rng.standard_normal((6, 8)) + 1j * rng.standard_normal((6, 8))
    op = build_dd_channel_operator(g)
    direct = despread(g * spread(d))
    if not np.allclose(op.apply_grid(d), direct, atol=1e-10):
        return "operator disagrees with the pointwise TF product"
    if not np.allclose(op.matrix() @ d.ravel(), direct.ravel(), atol=1e-10):
        return "dense operator disagrees with lazy application"
    return None


def _check_coding(rng):
    if not np.array_equal(conv_encode([1]), [1, 1, 0, 1, 1, 1]):
        return "encoder output for a single 1 bit is wrong"
    info = rng.integers(0, 2, size=200).astype(np.int8)
    coded = conv_encode(info)
    llrs = 8.0 * (1.0 - 2.0 * coded)
    info_llrs, _ = bcjr_decode(llrs)
    if not np.array_equal((info_llrs < 0).astype(np.int8), info):
        return "decoder fails on clean channel LLRs"
    return None


def _check_noiseless_frames():
    base = SimConfig(
        velocities_kmh=(120.0,),
        ebn0_db_points=(float("inf"),),
        frames_per_point=1,
        max_iters=2,
    )
    for mode in ("otfs-tf", "otfs-dd", "ofdm"):
        cfg = replace(base, mode=mode)
        fr = run_frame(cfg, 120.0, float("inf"), 0)
        if int(fr.bit_errors[-1]) != 0:
            return f"noiseless frame has bit errors in mode {mode}"
    return None


def _check_determinism():
    cfg = SimConfig(
        mode="otfs-tf",
        velocities_kmh=(50.0,),
        ebn0_db_points=(6.0,),
        frames_per_point=1,
        max_iters=3,
    )
    a = run_frame(cfg, 50.0, 6.0, 7)
    b = run_frame(cfg, 50.0, 6.0, 7)
    if not np.array_equal(a.bit_errors, b.bit_errors):
        return "identical frame seeds produced different error counts"
    return None


def _check_channel_energy():
    cfg = SimConfig()
    geom = cfg.geometry(200.0)
    rng = np.random.default_rng(1234)
    total = 0.0
    n_draws = 50
    for _ in range(n_draws):
        paths = sample_paths(geom, cfg.rms_delay_spread_s, cfg.num_paths, rng)
        g = evaluate_tf_response(paths, geom)
        total += float(np.mean(np.abs(g) ** 2))
        if abs(paths.total_power() - 1.0) > 1e-12:
            return "path powers are not normalized"
    mean_energy = total / n_draws
    if abs(mean_energy - 1.0) > 0.1:
        return f"mean per-bin channel energy {mean_energy:.3f} is off unity"
    return None


CHECKS = (
    ("transform pair", lambda rng: _check_transforms(rng)),
    ("dd channel operator", lambda rng: _check_operator(rng)),
    ("coding chain", lambda rng: _check_coding(rng)),
    ("noiseless frames", lambda rng: _check_noiseless_frames()),
    ("frame determinism", lambda rng: _check_determinism()),
    ("channel statistics", lambda rng: _check_channel_energy()),
)


def run_battery(emit):
    """Run every check; returns 0 when all pass, 1 otherwise."""
    rng = np.random.default_rng(2024)
    failures = 0
    for name, check in CHECKS:
        message = check(rng)
        if message is None:
            emit(f"ok   {name}")
        else:
            emit(f"FAIL {name}: {message}")
            failures += 1
    emit(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return 0 if failures == 0 else 1
