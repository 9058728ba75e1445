"""Equalization and iterative soft interference-cancellation detection.

The received TF grid is ``y = g * x + n`` with ``x`` the spread data grid
and ``n`` white Gaussian noise of per-bin variance sigma2.  Iteration 1
applies per-bin MMSE equalization followed by despreading and a Gaussian
max-log demapper.  Later iterations reconstruct the interference from the
decoder's soft symbols, cancel it in parallel for all symbols, and detect
each symbol with a matched filter whitened by the per-bin residual
interference-plus-noise variance ``sigma2 + e_mean * |g|^2``, where
``e_mean`` is the mean soft-symbol error power fed back by the decoder.
With no feedback (``e_mean = 1``) the whitened statistic coincides with
the iteration-1 MMSE demapper; with perfect feedback (``e_mean = 0``) it
reduces to the plain matched filter on the cancelled observation.

Both detection domains implement the same linear algebra: the TF route
cancels on the received grid directly, the DD route transforms the
observation once and cancels against the DD channel operator.  Their
per-symbol decision statistics agree to floating-point precision.
"""

from dataclasses import dataclass

import numpy as np

from .coding import maxlog_bit_llrs
from .grids import basis_column, despread, spread

LLR_CLAMP = 50.0
_TINY = 1.0e-30


def mmse_equalize(received, tf_response, sigma2):
    """Per-bin MMSE estimate ``x_hat = y * conj(g) / (|g|^2 + sigma2)``.

    Bins where both the response and sigma2 vanish return 0.
    """
    y = np.asarray(received, dtype=np.complex128)
    g = np.asarray(tf_response, dtype=np.complex128)
    if y.shape != g.shape:
        raise ValueError("received and tf_response shapes differ")
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    denom = np.abs(g) ** 2 + sigma2
    safe = np.where(denom > 0, denom, 1.0)
    return np.where(denom > 0, y * np.conj(g) / safe, 0.0 + 0.0j)


def mmse_symbol_statistics(tf_response, sigma2, spreading="dsft"):
    """Post-equalization per-symbol gain and residual variance.

    With per-bin MMSE coefficients ``a_r = |g_r|^2 / (|g_r|^2 + sigma2)``
    and ``b_r = conj(g_r) / (|g_r|^2 + sigma2)``, the despread estimate of
    symbol omega is ``gain * d_omega`` plus a zero-mean residual.  For the
    constant-modulus spreading basis the gain is exactly ``mean(a)`` for
    every symbol and the residual variance is frame-constant:
    ``mean((a - mean(a))^2) + sigma2 * mean(|b|^2)``.  For identity
    spreading (plain per-bin signaling) the statistics stay per-bin.

    Returns
    -------
    gain : (MN,) float ndarray
    variance : (MN,) float ndarray
    """
    g = np.asarray(tf_response, dtype=np.complex128)
    denom = np.abs(g) ** 2 + sigma2
    safe = np.where(denom > 0, denom, 1.0)
    a = np.where(denom > 0, np.abs(g) ** 2 / safe, 0.0).ravel()
    b_sq = np.where(denom > 0, np.abs(g) ** 2 / safe**2, 0.0).ravel()
    if spreading == "dsft":
        gain = np.full(a.size, a.mean())
        variance = np.full(a.size, np.mean((a - a.mean()) ** 2) + sigma2 * b_sq.mean())
    elif spreading == "identity":
        gain = a
        variance = sigma2 * b_sq
    else:
        raise ValueError(f"unknown spreading '{spreading}'")
    return gain, variance


class EffectiveSpreading:
    """Effective channel-times-spreading map ``x = g * spread(d)``.

    Provides the forward map, its adjoint, and lazy access to single
    columns of the (MN, MN) effective matrix without materializing it.
    All columns share the energy ``mean(|g|^2)`` because the spreading
    basis has constant modulus.
    """

    def __init__(self, tf_response):
        g = np.asarray(tf_response, dtype=np.complex128)
        if g.ndim != 2:
            raise ValueError("tf_response must be 2-d")
        self.tf_response = g
        self.m_len, self.n_len = g.shape
        self.size = self.m_len * self.n_len
        self.column_energy = float(np.mean(np.abs(g) ** 2))

    def apply_grid(self, dd_grid):
        return self.tf_response * spread(dd_grid)

    def adjoint_grid(self, tf_grid):
        return despread(np.conj(self.tf_response) * tf_grid)

    def column(self, omega):
        """Vectorized TF image of the DD unit impulse at flat index omega."""
        col = self.tf_response * basis_column(self.m_len, self.n_len, omega)
        return col.ravel()


def pic_residual_tf(received_vec, eff, soft_grid, omega):
    """TF-domain parallel-cancellation residual for symbol ``omega``.

    Subtracts the reconstructed interference of all soft symbols, then
    adds back the contribution of symbol omega so that only its own term
    remains alongside noise and cancellation error.
    """
    y = np.asarray(received_vec, dtype=np.complex128).ravel()
    if y.size != eff.size:
        raise ValueError("received vector length does not match the grid")
    soft = np.asarray(soft_grid, dtype=np.complex128)
    recon = eff.apply_grid(soft).ravel()
    b_omega = soft.ravel()[omega]
    return y - recon + eff.column(omega) * b_omega


def pic_residual_dd(received_dd_vec, operator, soft_grid, omega):
    """DD-domain parallel-cancellation residual for symbol ``omega``.

    Same cancellation as :func:`pic_residual_tf` but carried out on the
    despread observation with the DD channel operator's columns.
    """
    y_dd = np.asarray(received_dd_vec, dtype=np.complex128).ravel()
    if y_dd.size != operator.size:
        raise ValueError("received vector length does not match the grid")
    soft = np.asarray(soft_grid, dtype=np.complex128)
    recon = operator.apply_grid(soft).ravel()
    b_omega = soft.ravel()[omega]
    return y_dd - recon + operator.column(omega) * b_omega


def ml_symbol_detect(residual, column, constellation, sigma2):
    """Exhaustive per-symbol detection against one channel column.

    Evaluates ``|v - column * b|^2 / sigma2`` for every constellation
    point b and returns max-log bit LLRs, the hard decision, and its
    label index.  Ties resolve toward the smaller label.
    """
    v = np.asarray(residual, dtype=np.complex128).ravel()
    col = np.asarray(column, dtype=np.complex128).ravel()
    if v.shape != col.shape:
        raise ValueError("residual and column shapes differ")
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    scale = max(sigma2, _TINY)
    points = constellation.points
    # ||v - c b||^2 = ||v||^2 - 2 Re(b* <c, v>) + |b|^2 ||c||^2; the common
    # ||v||^2 term cancels in every LLR and argmin comparison.
    inner = np.vdot(col, v)
    col_energy = np.real(np.vdot(col, col))
    metrics = (
        -2.0 * np.real(np.conj(points) * inner) + np.abs(points) ** 2 * col_energy
    ) / scale
    llrs = maxlog_bit_llrs(metrics[None, :], constellation.labels)[0]
    best = int(np.argmin(metrics))
    return llrs, points[best], best


@dataclass
class DetectorResult:
    """Per-iteration outputs of :func:`run_detector`.

    Attributes
    ----------
    info_bits : (iterations, K) int8 ndarray
        Hard information-bit decisions after each iteration.  When early
        termination fires, later rows repeat the terminating decision.
    iterations_run : int
        Number of iterations actually computed.
    detector_llrs : list of (2*MN,) ndarrays or None
        Pre-decoder LLR frames per computed iteration (symbol order),
        present when requested.
    early_exit_iteration : int or None
        Iteration (1-based) at which the genie check matched, if any.
    """

    info_bits: np.ndarray
    iterations_run: int
    detector_llrs: list | None
    early_exit_iteration: int | None


def pic_symbol_statistics(tf_response, sigma2, mean_error, spreading="dsft"):
    """Whitening weights and post-combining statistics for one PIC pass.

    The cancelled observation for each symbol carries residual
    interference of per-bin variance ``mean_error * |g_r|^2`` on top of
    the noise, so the matched filter is whitened per bin by
    ``C_r = sigma2 + mean_error * |g_r|^2``.  The combined statistic for
    symbol omega is then ``gain * d_omega`` plus a zero-mean residual of
    variance ``gain * (1 - mean_error * gain)``; with ``mean_error = 1``
    these equal the iteration-1 MMSE statistics exactly.

    Returns
    -------
    weights : (M, N) complex ndarray
        Per-bin correlator weights ``conj(g) / C`` applied before the
        adjoint spreading map.
    gain : (MN,) float ndarray
    variance : (MN,) float ndarray
    """
    g = np.asarray(tf_response, dtype=np.complex128)
    if not 0.0 <= mean_error <= 1.0:
        raise ValueError("mean_error must lie in [0, 1]")
    g_sq = np.abs(g) ** 2
    c = np.maximum(sigma2 + mean_error * g_sq, _TINY)
    weights = np.conj(g) / c
    per_bin = (g_sq / c).ravel()
    if spreading == "dsft":
        gain = np.full(per_bin.size, per_bin.mean())
    elif spreading == "identity":
        gain = per_bin
    else:
        raise ValueError(f"unknown spreading '{spreading}'")
    variance = np.maximum(gain * (1.0 - mean_error * gain), _TINY)
    return weights, gain, variance


def _gaussian_bit_llrs(z, gain, variance, constellation):
    """Vectorized max-log LLRs for all symbols from combined statistics.

    Models each entry of z as ``gain * b`` plus complex Gaussian residual
    of the given variance and scores every constellation point.
    """
    points = constellation.points
    metrics = (
        np.abs(z[:, None] - gain[:, None] * points[None, :]) ** 2
        / variance[:, None]
    )
    return maxlog_bit_llrs(metrics, constellation.labels)


def run_detector(
    received,
    tf_response,
    sigma2,
    chain,
    domain="tf",
    max_iters=6,
    spreading="dsft",
    tx_info_bits=None,
    collect_llrs=False,
):
    """Iterative detection and decoding of one received frame.

    Parameters
    ----------
    received : (M, N) complex array_like
        Received TF grid.
    tf_response : (M, N) complex array_like
        Known channel response (perfect CSI).
    sigma2 : float
        Per-bin noise variance; 0 is allowed for noiseless runs.
    chain : CodingChain
        Encoder/decoder pair tied to this grid shape.  Iterations after
        the first cancel the decoder's soft symbols and re-detect with a
        residual-variance-whitened matched filter (see
        :func:`pic_symbol_statistics`).
    domain : {"tf", "dd"}
        Where cancellation and per-symbol detection are carried out.
        Both produce identical statistics up to floating-point error.
    max_iters : int
        Number of detection/decoding iterations (>= 1).
    spreading : {"dsft", "identity"}
        Data spreading scheme; "identity" yields plain per-bin signaling
        on the TF grid (the single-carrier-per-bin baseline).
    tx_info_bits : array_like or None
        When given, enables the genie stopping rule: once the decoded
        bits match, remaining iterations reuse that decision.
    collect_llrs : bool
        Keep the per-iteration pre-decoder LLR frames.

    Returns
    -------
    DetectorResult
    """
    y = np.asarray(received, dtype=np.complex128)
    g = np.asarray(tf_response, dtype=np.complex128)
    if y.shape != g.shape or y.shape != chain.grid_shape:
        raise ValueError("received, tf_response, and chain shapes must agree")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if domain not in ("tf", "dd"):
        raise ValueError(f"unknown domain '{domain}'")
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")

    constellation = chain.constellation
    if spreading == "dsft":
        fwd, adj = spread, despread
    elif spreading == "identity":
        fwd = adj = lambda grid: np.asarray(grid, dtype=np.complex128)
    else:
        raise ValueError(f"unknown spreading '{spreading}'")

    if domain == "dd":
        y_dd = adj(y)

    if tx_info_bits is not None:
        tx_info_bits = np.asarray(tx_info_bits)
        if tx_info_bits.shape != (chain.n_info_bits,):
            raise ValueError("tx_info_bits length does not match the chain")

    info_bits = np.zeros((max_iters, chain.n_info_bits), dtype=np.int8)
    llr_frames = [] if collect_llrs else None
    soft = None
    early_exit = None

    for it in range(1, max_iters + 1):
        if early_exit is not None:
            info_bits[it - 1] = info_bits[early_exit - 1]
            continue
        if it == 1:
            x_hat = mmse_equalize(y, g, sigma2)
            d_hat = adj(x_hat).ravel()
            gain, variance = mmse_symbol_statistics(g, sigma2, spreading)
            scale = np.maximum(variance, _TINY)
            det_llrs = _gaussian_bit_llrs(d_hat, gain, scale, constellation).ravel()
        else:
            e_mean = float(
                np.mean(np.clip(1.0 - np.abs(soft.ravel()) ** 2, 0.0, 1.0))
            )
            weights, gain, variance = pic_symbol_statistics(
                g, sigma2, e_mean, spreading
            )
            if domain == "tf":
                resid = y - g * fwd(soft)
                z = adj(weights * resid).ravel() + gain * soft.ravel()
            else:
                resid_dd = y_dd - adj(g * fwd(soft))
                z = adj(weights * fwd(resid_dd)).ravel() + gain * soft.ravel()
            det_llrs = _gaussian_bit_llrs(z, gain, variance, constellation).ravel()
        det_llrs = np.clip(det_llrs, -LLR_CLAMP, LLR_CLAMP)
        decoded = chain.decode(det_llrs)
        info_bits[it - 1] = decoded.info_bits
        if collect_llrs:
            llr_frames.append(det_llrs)
        if tx_info_bits is not None and np.array_equal(decoded.info_bits, tx_info_bits):
            early_exit = it
            continue
        if it < max_iters:
            soft = chain.soft_symbol_grid(decoded.extrinsic)

    iterations_run = early_exit if early_exit is not None else max_iters
    return DetectorResult(
        info_bits=info_bits,
        iterations_run=iterations_run,
        detector_llrs=llr_frames,
        early_exit_iteration=early_exit,
    )
