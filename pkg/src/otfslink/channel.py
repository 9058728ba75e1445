"""Geometry-based doubly selective channel model.

The channel is a sum of discrete propagation paths.  Each path carries a
complex gain, a delay drawn from an exponential power-delay profile
truncated to the cyclic prefix, and a Doppler shift drawn from the
classical isotropic-scattering (cosine-of-uniform-angle) distribution.
The per-frame TF response is evaluated on the (M, N) grid assuming the
delay-Doppler spreads are small enough for the per-bin pointwise model to
hold.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class SystemGeometry:
    """Static waveform and mobility parameters.

    Parameters
    ----------
    n_subcarriers : int
        Number of subcarriers N per OFDM symbol.
    frame_len : int
        Number of OFDM symbols M per frame.
    cp_len : int
        Cyclic prefix length G in chips.
    bandwidth_hz : float
        Total bandwidth B; the chip time is 1/B.
    carrier_hz : float
        Carrier frequency used to convert velocity to Doppler.
    velocity_mps : float
        Terminal speed in meters per second (non-negative).
    doppler_margin : float
        Dimensionless bound: the maximum Doppler shift must stay below
        ``doppler_margin / (chip_time * n_subcarriers)`` for the pointwise
        TF channel model to be valid.
    """

    n_subcarriers: int
    frame_len: int
    cp_len: int
    bandwidth_hz: float
    carrier_hz: float
    velocity_mps: float = 0.0
    doppler_margin: float = 0.01

    def __post_init__(self):
        for name in ("n_subcarriers", "frame_len", "cp_len"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigurationError(f"{name} must be a positive integer")
        if self.bandwidth_hz <= 0 or self.carrier_hz <= 0:
            raise ConfigurationError("bandwidth_hz and carrier_hz must be positive")
        if self.velocity_mps < 0:
            raise ConfigurationError("velocity_mps must be non-negative")
        if not (0 < self.doppler_margin < 1):
            raise ConfigurationError("doppler_margin must lie in (0, 1)")
        bound = self.doppler_margin / (self.chip_time * self.n_subcarriers)
        if self.max_doppler_hz >= bound:
            raise ConfigurationError(
                f"maximum Doppler shift {self.max_doppler_hz:.6g} Hz violates "
                f"the narrow-Doppler condition (< {bound:.6g} Hz); reduce the "
                f"velocity or carrier frequency"
            )

    @property
    def chip_time(self):
        """Chip (sample) duration 1/B in seconds."""
        return 1.0 / self.bandwidth_hz

    @property
    def symbol_time(self):
        """OFDM symbol duration including the cyclic prefix."""
        return self.chip_time * (self.n_subcarriers + self.cp_len)

    @property
    def max_delay_s(self):
        """Largest delay representable inside the cyclic prefix."""
        return self.cp_len * self.chip_time

    @property
    def max_doppler_hz(self):
        """Maximum Doppler shift v * f_c / c."""
        return self.velocity_mps * self.carrier_hz / SPEED_OF_LIGHT

    @property
    def max_normalized_doppler(self):
        """Maximum Doppler shift normalized to the symbol rate."""
        return self.max_doppler_hz * self.symbol_time


@dataclass(frozen=True)
class PathSet:
    """One realization of the multipath geometry.

    Attributes
    ----------
    eta : (P,) complex ndarray
        Path gains, normalized so that ``sum(|eta|**2) == 1``.
    theta : (P,) float ndarray
        Delays normalized to the OFDM symbol core, ``tau / (N * chip_time)``.
    nu : (P,) float ndarray
        Doppler shifts normalized to the symbol rate, ``f * symbol_time``.
    """

    eta: np.ndarray
    theta: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=np.complex128)
        theta = np.asarray(self.theta, dtype=np.float64)
        nu = np.asarray(self.nu, dtype=np.float64)
        if eta.ndim != 1 or eta.size < 1:
            raise ValueError("eta must be a non-empty 1-d array")
        if theta.shape != eta.shape or nu.shape != eta.shape:
            raise ValueError("eta, theta, nu must have identical shapes")
        if np.any(theta < 0):
            raise ValueError("normalized delays must be non-negative")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "nu", nu)

    @property
    def num_paths(self):
        return self.eta.size

    def total_power(self):
        return float(np.sum(np.abs(self.eta) ** 2))


def sample_paths(geometry, rms_delay_spread_s, num_paths, rng):
    """Draw one multipath realization.

    Delays are exponential with the given RMS spread, redrawn until they
    fall inside the cyclic prefix.  Path powers follow the exponential
    power-delay profile evaluated at the drawn delays and are renormalized
    to unit total power per realization.  Gain phases and arrival angles
    are uniform; the Doppler shift of each path is the maximum Doppler
    times the cosine of its arrival angle.

    Parameters
    ----------
    geometry : SystemGeometry
    rms_delay_spread_s : float
        RMS delay spread of the exponential profile, in seconds.
    num_paths : int
        Number of discrete paths P.
    rng : numpy.random.Generator

    Returns
    -------
    PathSet
    """
    if num_paths < 1:
        raise ValueError("num_paths must be at least 1")
    if rms_delay_spread_s <= 0:
        raise ValueError("rms_delay_spread_s must be positive")
    if rms_delay_spread_s > geometry.max_delay_s:
        raise ConfigurationError(
            f"RMS delay spread {rms_delay_spread_s:.3g} s does not fit the "
            f"cyclic prefix ({geometry.max_delay_s:.3g} s)"
        )
    delays = rng.exponential(rms_delay_spread_s, size=num_paths)
    # Rejection step keeps the profile shape inside the prefix.
    bad = delays > geometry.max_delay_s
    while np.any(bad):
        delays[bad] = rng.exponential(rms_delay_spread_s, size=int(bad.sum()))
        bad = delays > geometry.max_delay_s
    weights = np.exp(-delays / rms_delay_spread_s)
    powers = weights / weights.sum()
    phases = rng.uniform(0.0, 2.0 * np.pi, size=num_paths)
    eta = np.sqrt(powers) * np.exp(1j * phases)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=num_paths)
    doppler_hz = geometry.max_doppler_hz * np.cos(angles)
    theta = delays / (geometry.n_subcarriers * geometry.chip_time)
    nu = doppler_hz * geometry.symbol_time
    return PathSet(eta=eta, theta=theta, nu=nu)


def evaluate_tf_response(paths, geometry):
    """Pointwise TF response of a path set on the (M, N) grid.

    ``g[m, q] = sum_l eta_l exp(-j 2 pi theta_l q) exp(j 2 pi nu_l m)``.

    Returns
    -------
    (frame_len, n_subcarriers) complex ndarray
    """
    m = np.arange(geometry.frame_len)
    q = np.arange(geometry.n_subcarriers)
    time_phase = np.exp(2j * np.pi * np.outer(m, paths.nu))  # (M, P)
    freq_phase = np.exp(-2j * np.pi * np.outer(paths.theta, q))  # (P, N)
    return (time_phase * paths.eta[None, :]) @ freq_phase


def apply_windows(tf_response, tx_window=None, rx_window=None):
    """Apply transmit/receive window weights to a TF response.

    Both windows are per-bin multiplicative weights of the same shape as
    the response; ``None`` means an all-ones window.
    """
    g = np.asarray(tf_response, dtype=np.complex128)
    out = g
    for w, name in ((tx_window, "tx_window"), (rx_window, "rx_window")):
        if w is None:
            continue
        w = np.asarray(w)
        if w.shape != g.shape:
            raise ValueError(f"{name} shape {w.shape} does not match {g.shape}")
        out = out * w
    return out


def write_paths_csv(paths, path_or_file):
    """Export a path realization as CSV.

    Columns: path index, Re/Im of the gain, normalized delay, normalized
    Doppler.
    """
    rows = [
        (
            i,
            f"{paths.eta[i].real:.12g}",
            f"{paths.eta[i].imag:.12g}",
            f"{paths.theta[i]:.12g}",
            f"{paths.nu[i]:.12g}",
        )
        for i in range(paths.num_paths)
    ]
    header = ("path", "gain_re", "gain_im", "delay_norm", "doppler_norm")
    if hasattr(path_or_file, "write"):
        writer = csv.writer(path_or_file)
        writer.writerow(header)
        writer.writerows(rows)
    else:
        with open(path_or_file, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
