"""Channel geometry, path statistics, and TF-response properties."""

import io

import numpy as np
import pytest

from otfslink.channel import (
    SPEED_OF_LIGHT,
    PathSet,
    SystemGeometry,
    apply_windows,
    evaluate_tf_response,
    sample_paths,
    write_paths_csv,
)
from otfslink.errors import ConfigurationError

# 0.99 quantile of the chi-square distribution with 19 degrees of freedom,
# frozen so the goodness-of-fit test needs no scipy at runtime.
CHI2_CRIT_99_19 = 36.19086912927004


def reference_geometry(velocity_kmh=200.0):
    return SystemGeometry(
        n_subcarriers=64,
        frame_len=36,
        cp_len=16,
        bandwidth_hz=10.0e6,
        carrier_hz=5.9e9,
        velocity_mps=velocity_kmh / 3.6,
    )


class TestSystemGeometry:
    def test_derived_quantities_hand_values(self):
        geom = reference_geometry(200.0)
        assert geom.chip_time == pytest.approx(1.0e-7)
        assert geom.symbol_time == pytest.approx(8.0e-6)
        assert geom.max_delay_s == pytest.approx(1.6e-6)
        f_max = (200.0 / 3.6) * 5.9e9 / SPEED_OF_LIGHT
        assert geom.max_doppler_hz == pytest.approx(f_max)
        assert geom.max_doppler_hz == pytest.approx(1093.3489787, abs=1e-4)
        assert geom.max_normalized_doppler == pytest.approx(f_max * 8.0e-6)

    def test_zero_velocity_is_valid(self):
        geom = reference_geometry(0.0)
        assert geom.max_doppler_hz == 0.0

    def test_narrow_doppler_condition_enforced(self):
        # The subcarrier spacing bound is margin * B / N = 1562.5 Hz here;
        # raising the velocity enough must be rejected.
        with pytest.raises(ConfigurationError):
            reference_geometry(290.0)
        # Just inside the bound still validates.
        reference_geometry(285.0)

    def test_parameter_validation(self):
        with pytest.raises(ConfigurationError):
            SystemGeometry(0, 36, 16, 10e6, 5.9e9)
        with pytest.raises(ConfigurationError):
            SystemGeometry(64, 36, 16, -1.0, 5.9e9)
        with pytest.raises(ConfigurationError):
            SystemGeometry(64, 36, 16, 10e6, 5.9e9, velocity_mps=-1.0)
        with pytest.raises(ConfigurationError):
            SystemGeometry(64, 36, 16, 10e6, 5.9e9, doppler_margin=1.5)


class TestPathSampling:
    def test_unit_total_power_every_realization(self):
        geom = reference_geometry()
        rng = np.random.default_rng(101)
        for _ in range(50):
            paths = sample_paths(geom, 0.4e-6, 60, rng)
            assert paths.total_power() == pytest.approx(1.0, abs=1e-12)

    def test_delays_respect_cyclic_prefix(self):
        geom = reference_geometry()
        rng = np.random.default_rng(102)
        paths = sample_paths(geom, 0.4e-6, 5000, rng)
        delays = paths.theta * geom.n_subcarriers * geom.chip_time
        assert np.all(delays >= 0.0)
        assert np.all(delays <= geom.max_delay_s)

    def test_rms_spread_must_fit_prefix(self):
        geom = reference_geometry()
        rng = np.random.default_rng(103)
        with pytest.raises(ConfigurationError):
            sample_paths(geom, 2.0e-6, 60, rng)
        with pytest.raises(ValueError):
            sample_paths(geom, -1.0, 60, rng)
        with pytest.raises(ValueError):
            sample_paths(geom, 0.4e-6, 0, rng)

    def test_rms_delay_spread_recovery(self):
        # Corrected sample-mean estimator of the exponential scale under
        # truncation at L = cp_len * chip_time: E[tau] = scale * c with
        # c = 1 - x * exp(-x) / (1 - exp(-x)), x = L / scale.
        geom = reference_geometry()
        rng = np.random.default_rng(104)
        configured = 0.4e-6
        paths = sample_paths(geom, configured, 200_000, rng)
        delays = paths.theta * geom.n_subcarriers * geom.chip_time
        x = geom.max_delay_s / configured
        correction = 1.0 - x * np.exp(-x) / (1.0 - np.exp(-x))
        estimate = float(np.mean(delays)) / correction
        # Truncation rejects exp(-4) ~ 1.8% > 1% of draws: 10% tolerance.
        assert abs(estimate - configured) / configured < 0.10

    def test_doppler_matches_clarke_density(self):
        # f = f_max cos(angle) with uniform angle has the classical
        # arcsine density; chi-square GOF on 20 equiprobable bins at the
        # 0.01 significance level.
        geom = reference_geometry()
        rng = np.random.default_rng(105)
        paths = sample_paths(geom, 0.4e-6, 150_000, rng)
        f = paths.nu / geom.symbol_time
        f_max = geom.max_doppler_hz
        assert np.all(np.abs(f) <= f_max)
        n_bins = 20
        # CDF of f: F(x) = 1 - arccos(x / f_max) / pi; equiprobable bin
        # edges invert it.
        k = np.arange(n_bins + 1) / n_bins
        edges = f_max * np.cos(np.pi * (1.0 - k))
        edges[0] -= 1.0  # include the endpoint
        edges[-1] += 1.0
        observed, _ = np.histogram(f, bins=edges)
        expected = f.size / n_bins
        chi2 = float(np.sum((observed - expected) ** 2 / expected))
        assert chi2 < CHI2_CRIT_99_19

    def test_pathset_validation(self):
        with pytest.raises(ValueError):
            PathSet(eta=np.ones((2, 2)), theta=np.zeros(4), nu=np.zeros(4))
        with pytest.raises(ValueError):
            PathSet(eta=np.ones(3), theta=np.zeros(2), nu=np.zeros(3))
        with pytest.raises(ValueError):
            PathSet(eta=np.ones(2), theta=np.array([-0.1, 0.0]), nu=np.zeros(2))


class TestTFResponse:
    def test_single_path_hand_values(self):
        geom = reference_geometry()
        m = np.arange(geom.frame_len)
        q = np.arange(geom.n_subcarriers)

        flat = PathSet(eta=np.array([1.0 + 0j]), theta=np.zeros(1), nu=np.zeros(1))
        assert np.max(np.abs(evaluate_tf_response(flat, geom) - 1.0)) < 1e-12

        delayed = PathSet(
            eta=np.array([1.0 + 0j]),
            theta=np.array([1.0 / geom.n_subcarriers]),
            nu=np.zeros(1),
        )
        expect = np.exp(-2j * np.pi * q / geom.n_subcarriers)[None, :] * np.ones(
            (geom.frame_len, 1)
        )
        assert np.max(np.abs(evaluate_tf_response(delayed, geom) - expect)) < 1e-12

        shifted = PathSet(
            eta=np.array([1.0 + 0j]),
            theta=np.zeros(1),
            nu=np.array([1.0 / geom.frame_len]),
        )
        expect = np.exp(2j * np.pi * m / geom.frame_len)[:, None] * np.ones(
            (1, geom.n_subcarriers)
        )
        assert np.max(np.abs(evaluate_tf_response(shifted, geom) - expect)) < 1e-12

    def test_zero_velocity_response_constant_in_time(self):
        geom = reference_geometry(0.0)
        rng = np.random.default_rng(106)
        for _ in range(10):
            paths = sample_paths(geom, 0.4e-6, 60, rng)
            g = evaluate_tf_response(paths, geom)
            assert np.array_equal(g, np.tile(g[:1], (geom.frame_len, 1)))

    def test_mean_grid_energy_near_unity(self):
        # Per-realization grid energy fluctuates through path cross-terms,
        # but its expectation is the unit total path power.
        geom = reference_geometry()
        rng = np.random.default_rng(107)
        energies = []
        for _ in range(1000):
            paths = sample_paths(geom, 0.4e-6, 60, rng)
            g = evaluate_tf_response(paths, geom)
            energies.append(np.mean(np.abs(g) ** 2))
        energies = np.array(energies)
        stderr = energies.std(ddof=1) / np.sqrt(energies.size)
        assert abs(energies.mean() - 1.0) < 3.0 * stderr + 1e-3

    def test_windows(self):
        geom = reference_geometry()
        rng = np.random.default_rng(108)
        paths = sample_paths(geom, 0.4e-6, 60, rng)
        g = evaluate_tf_response(paths, geom)
        assert np.array_equal(apply_windows(g), g)
        assert np.array_equal(apply_windows(g, np.ones_like(g), np.ones_like(g)), g)
        assert np.max(np.abs(apply_windows(g, 2.0 * np.ones_like(g)) - 2.0 * g)) == 0.0
        assert np.all(apply_windows(g, rx_window=np.zeros_like(g)) == 0.0)
        with pytest.raises(ValueError):
            apply_windows(g, tx_window=np.ones((2, 2)))


def test_paths_csv_roundtrip():
    geom = reference_geometry()
    rng = np.random.default_rng(109)
    paths = sample_paths(geom, 0.4e-6, 12, rng)
    buf = io.StringIO()
    write_paths_csv(paths, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "path,gain_re,gain_im,delay_norm,doppler_norm"
    assert len(lines) == 13
    for i, line in enumerate(lines[1:]):
        cells = line.split(",")
        assert int(cells[0]) == i
        assert complex(float(cells[1]), float(cells[2])) == pytest.approx(
            paths.eta[i], abs=1e-10
        )
        assert float(cells[3]) == pytest.approx(paths.theta[i], abs=1e-12)
        assert float(cells[4]) == pytest.approx(paths.nu[i], abs=1e-12)
