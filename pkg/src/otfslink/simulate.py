"""Monte Carlo BER measurement harness.

A sweep runs independent frames over a grid of (velocity, Eb/N0) points
for one transmission mode and aggregates exact bit and frame error
counts per detector iteration.  Every frame is seeded from the pair
(master_seed, frame_index), so frame i sees the same data bits, channel
realization, and underlying noise draws at every Eb/N0 point, in every
mode, and regardless of how frames are distributed over workers.

Per-frame draw order from the frame RNG is fixed and part of the
reproducibility contract: information bits, interleaver permutation,
path realization, then noise (standard normal draws scaled by the noise
standard deviation).
"""

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import SystemGeometry, evaluate_tf_response, sample_paths
from .coding import CodingChain, make_interleaver, qpsk
from .detector import run_detector
from .errors import ConfigurationError
from .grids import spread

MODES = ("otfs-tf", "otfs-dd", "ofdm")

KMH_TO_MPS = 1.0 / 3.6


def noise_variance_from_ebn0(ebn0_db, code_rate=0.5, bits_per_symbol=2):
    """Per-bin complex noise variance for unit-energy symbols.

    ``sigma2 = 1 / (code_rate * bits_per_symbol * 10**(ebn0_db / 10))``.
    ``ebn0_db = inf`` returns 0 for noiseless runs.
    """
    if code_rate <= 0 or bits_per_symbol <= 0:
        raise ValueError("code_rate and bits_per_symbol must be positive")
    if np.isposinf(ebn0_db):
        return 0.0
    if not np.isfinite(ebn0_db):
        raise ValueError("ebn0_db must be finite or +inf")
    return 1.0 / (code_rate * bits_per_symbol * 10.0 ** (ebn0_db / 10.0))


@dataclass(frozen=True)
class SimConfig:
    """Complete description of one sweep.

    Waveform defaults correspond to the reference operating point: a
    64-subcarrier, 36-symbol frame with a 16-chip cyclic prefix over
    10 MHz at 5.9 GHz carrier, QPSK with the rate-1/2 terminated code,
    and a 60-path channel with 0.4 us RMS delay spread.
    """

    n_subcarriers: int = 64
    frame_len: int = 36
    cp_len: int = 16
    bandwidth_hz: float = 10.0e6
    carrier_hz: float = 5.9e9
    rms_delay_spread_s: float = 0.4e-6
    num_paths: int = 60
    doppler_margin: float = 0.01
    mode: str = "otfs-tf"
    velocities_kmh: tuple = (0.0,)
    ebn0_db_points: tuple = (8.0,)
    frames_per_point: int = 100
    max_iters: int = 6
    master_seed: int = 1
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(
                f"mode must be one of {', '.join(MODES)}; got '{self.mode}'"
            )
        if self.frames_per_point < 1:
            raise ConfigurationError("frames_per_point must be at least 1")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be at least 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")
        if self.master_seed < 0:
            raise ConfigurationError("master_seed must be non-negative")
        if len(self.velocities_kmh) < 1 or len(self.ebn0_db_points) < 1:
            raise ConfigurationError("need at least one velocity and one Eb/N0 point")
        if any(v < 0 for v in self.velocities_kmh):
            raise ConfigurationError("velocities must be non-negative")
        if self.num_paths < 1:
            raise ConfigurationError("num_paths must be at least 1")
        if self.rms_delay_spread_s <= 0:
            raise ConfigurationError("rms_delay_spread_s must be positive")
        if self.rms_delay_spread_s * self.bandwidth_hz > self.cp_len:
            raise ConfigurationError(
                "RMS delay spread does not fit inside the cyclic prefix"
            )
        for v in self.velocities_kmh:
            self.geometry(v)  # raises ConfigurationError on a bad regime

    def geometry(self, velocity_kmh):
        """SystemGeometry for one sweep velocity."""
        return SystemGeometry(
            n_subcarriers=self.n_subcarriers,
            frame_len=self.frame_len,
            cp_len=self.cp_len,
            bandwidth_hz=self.bandwidth_hz,
            carrier_hz=self.carrier_hz,
            velocity_mps=float(velocity_kmh) * KMH_TO_MPS,
            doppler_margin=self.doppler_margin,
        )

    @property
    def grid_shape(self):
        return (self.frame_len, self.n_subcarriers)

    @property
    def bits_per_frame(self):
        """Information bits per frame (rate-1/2 QPSK, two tail bits)."""
        return self.frame_len * self.n_subcarriers - 2

    def detector_params(self):
        """(domain, spreading, iterations) implied by the mode."""
        if self.mode == "otfs-tf":
            return "tf", "dsft", self.max_iters
        if self.mode == "otfs-dd":
            return "dd", "dsft", self.max_iters
        return "tf", "identity", 1


@dataclass
class FrameResult:
    bit_errors: np.ndarray  # (iterations,) int64
    frame_errors: np.ndarray  # (iterations,) int64, 0 or 1
    n_info_bits: int


def run_frame(cfg, velocity_kmh, ebn0_db, frame_index):
    """Simulate one frame end to end and count errors per iteration."""
    geom = cfg.geometry(velocity_kmh)
    sigma2 = noise_variance_from_ebn0(ebn0_db)
    rng = np.random.default_rng([cfg.master_seed, int(frame_index)])
    shape = cfg.grid_shape
    constellation = qpsk()
    n_coded = shape[0] * shape[1] * constellation.bits_per_symbol

    info_bits = rng.integers(0, 2, size=cfg.bits_per_frame).astype(np.int8)
    permutation = make_interleaver(n_coded, rng)
    chain = CodingChain(shape, constellation, permutation)
    data_grid = chain.encode_to_grid(info_bits)

    paths = sample_paths(geom, cfg.rms_delay_spread_s, cfg.num_paths, rng)
    tf_response = evaluate_tf_response(paths, geom)

    domain, spreading, iters = cfg.detector_params()
    tx_grid = spread(data_grid) if spreading == "dsft" else data_grid
    noise_draw = rng.standard_normal((2,) + shape)
    noise = (noise_draw[0] + 1j * noise_draw[1]) * np.sqrt(sigma2 / 2.0)
    received = tf_response * tx_grid + noise

    result = run_detector(
        received,
        tf_response,
        sigma2,
        chain,
        domain=domain,
        max_iters=iters,
        spreading=spreading,
        tx_info_bits=info_bits,
    )
    errors = np.array(
        [int(np.sum(row != info_bits)) for row in result.info_bits], dtype=np.int64
    )
    return FrameResult(
        bit_errors=errors,
        frame_errors=(errors > 0).astype(np.int64),
        n_info_bits=info_bits.size,
    )


@dataclass
class PointStats:
    """Aggregated error counts for one (mode, velocity, Eb/N0) point."""

    mode: str
    velocity_kmh: float
    ebn0_db: float
    iterations: int
    bits_per_frame: int
    frames: int = 0
    bit_errors: np.ndarray = field(default=None)
    sq_bit_errors: np.ndarray = field(default=None)
    frame_errors: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.bit_errors is None:
            self.bit_errors = np.zeros(self.iterations, dtype=np.int64)
        if self.sq_bit_errors is None:
            self.sq_bit_errors = np.zeros(self.iterations, dtype=np.int64)
        if self.frame_errors is None:
            self.frame_errors = np.zeros(self.iterations, dtype=np.int64)

    def add_counts(self, frames, bit_errors, sq_bit_errors, frame_errors):
        self.frames += int(frames)
        self.bit_errors += bit_errors
        self.sq_bit_errors += sq_bit_errors
        self.frame_errors += frame_errors

    def ber(self, iteration):
        """BER after the given 1-based iteration."""
        total = self.frames * self.bits_per_frame
        return self.bit_errors[iteration - 1] / total if total else 0.0

    def ber_stderr(self, iteration):
        """Standard error of the BER estimate from per-frame spread."""
        if self.frames < 2:
            return float("inf")
        e = self.bit_errors[iteration - 1]
        sq = self.sq_bit_errors[iteration - 1]
        mean = e / self.frames
        var = max(sq / self.frames - mean**2, 0.0)
        return np.sqrt(var / self.frames) / self.bits_per_frame

    def records(self):
        total_bits = self.frames * self.bits_per_frame
        out = []
        for it in range(1, self.iterations + 1):
            errs = int(self.bit_errors[it - 1])
            ferrs = int(self.frame_errors[it - 1])
            out.append(
                BerRecord(
                    mode=self.mode,
                    velocity_kmh=self.velocity_kmh,
                    ebn0_db=self.ebn0_db,
                    iteration=it,
                    frames=self.frames,
                    bits_total=total_bits,
                    bit_errors=errs,
                    ber=errs / total_bits if total_bits else 0.0,
                    frame_errors=ferrs,
                    fer=ferrs / self.frames if self.frames else 0.0,
                )
            )
        return out


@dataclass(frozen=True)
class BerRecord:
    mode: str
    velocity_kmh: float
    ebn0_db: float
    iteration: int
    frames: int
    bits_total: int
    bit_errors: int
    ber: float
    frame_errors: int
    fer: float


CSV_COLUMNS = (
    "mode",
    "velocity_kmh",
    "ebn0_db",
    "iteration",
    "frames",
    "bits_total",
    "bit_errors",
    "ber",
    "frame_errors",
    "fer",
)


def _run_frame_block(cfg, velocity_kmh, ebn0_db, start, stop):
    """Worker task: aggregate error counts over a contiguous frame range."""
    _, _, iters = cfg.detector_params()
    errors = np.zeros(iters, dtype=np.int64)
    sq_errors = np.zeros(iters, dtype=np.int64)
    frame_errors = np.zeros(iters, dtype=np.int64)
    for idx in range(start, stop):
        fr = run_frame(cfg, velocity_kmh, ebn0_db, idx)
        errors += fr.bit_errors
        sq_errors += fr.bit_errors**2
        frame_errors += fr.frame_errors
    return stop - start, errors, sq_errors, frame_errors


def _block_edges(total, blocks):
    edges = np.linspace(0, total, blocks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def sweep(cfg, progress=None):
    """Run the full sweep described by ``cfg``.

    Parameters
    ----------
    cfg : SimConfig
    progress : callable or None
        Invoked as ``progress(message)`` after each finished point.

    Returns
    -------
    list of PointStats, ordered by (velocity, Eb/N0).
    """
    _, _, iters = cfg.detector_params()
    points = []
    executor = None
    try:
        if cfg.workers > 1:
            executor = ProcessPoolExecutor(max_workers=cfg.workers)
        for velocity in cfg.velocities_kmh:
            for ebn0 in cfg.ebn0_db_points:
                stats = PointStats(
                    mode=cfg.mode,
                    velocity_kmh=float(velocity),
                    ebn0_db=float(ebn0),
                    iterations=iters,
                    bits_per_frame=cfg.bits_per_frame,
                )
                if executor is None:
                    blocks = [
                        _run_frame_block(cfg, velocity, ebn0, 0, cfg.frames_per_point)
                    ]
                else:
                    edges = _block_edges(cfg.frames_per_point, cfg.workers)
                    futures = [
                        executor.submit(_run_frame_block, cfg, velocity, ebn0, a, b)
                        for a, b in edges
                    ]
                    blocks = [f.result() for f in futures]
                for frames, errors, sq_errors, frame_errors in blocks:
                    stats.add_counts(frames, errors, sq_errors, frame_errors)
                points.append(stats)
                if progress is not None:
                    final_ber = stats.ber(iters)
                    progress(
                        f"{cfg.mode} v={velocity:g} km/h Eb/N0={ebn0:g} dB: "
                        f"ber[{iters}]={final_ber:.3e} over {stats.frames} frames"
                    )
    finally:
        if executor is not None:
            executor.shutdown()
    return points


def records_from_points(points):
    out = []
    for p in points:
        out.extend(p.records())
    return out


def _format_cell(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_ber_csv(records, path_or_file):
    """Write BER records as CSV with the stable column set."""
    rows = [[_format_cell(getattr(r, c)) for c in CSV_COLUMNS] for r in records]
    if hasattr(path_or_file, "write"):
        writer = csv.writer(path_or_file)
        writer.writerow(CSV_COLUMNS)
        writer.writerows(rows)
    else:
        with open(path_or_file, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            writer.writerows(rows)


def read_ber_csv(path_or_file):
    """Read back a CSV produced by :func:`write_ber_csv`."""

    def _parse(fh):
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            out.append(
                BerRecord(
                    mode=row["mode"],
                    velocity_kmh=float(row["velocity_kmh"]),
                    ebn0_db=float(row["ebn0_db"]),
                    iteration=int(row["iteration"]),
                    frames=int(row["frames"]),
                    bits_total=int(row["bits_total"]),
                    bit_errors=int(row["bit_errors"]),
                    ber=float(row["ber"]),
                    frame_errors=int(row["frame_errors"]),
                    fer=float(row["fer"]),
                )
            )
        return out

    if hasattr(path_or_file, "read"):
        return _parse(path_or_file)
    with open(path_or_file, newline="") as fh:
        return _parse(fh)


def with_overrides(cfg, **kwargs):
    """Copy of ``cfg`` with the given fields replaced (re-validated)."""
    return replace(cfg, **kwargs)
