"""Bit-interleaved coded modulation chain.

Rate-1/2 feedforward convolutional code with generator polynomials
(5, 7) in octal and constraint length 3, terminated by two zero tail
bits.  Coded bits pass through a frame-specific random interleaver and
map onto Gray-labeled constellation symbols.  Decoding uses the exact
log-domain forward-backward (BCJR) algorithm and returns both posterior
information-bit LLRs and extrinsic coded-bit LLRs for soft feedback.

LLR sign convention everywhere: positive means bit 0 is more likely,
``L = log(P(b=0) / P(b=1))``.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

CODE_POLYNOMIALS = (0o5, 0o7)
CONSTRAINT_LENGTH = 3
CODE_MEMORY = CONSTRAINT_LENGTH - 1
CODE_RATE = 0.5
NUM_STATES = 1 << CODE_MEMORY
LOG_ZERO = -1.0e30


def _build_trellis():
    """Tabulate next states and output bits for all (input, state) pairs.

    State convention: the most recent input bit occupies the high bit of
    the state.  Output bit j for input b in state s is the mod-2 inner
    product of polynomial j's taps with the register [b, s_high, s_low].
    """
    taps = []
    for poly in CODE_POLYNOMIALS:
        taps.append(
            [(poly >> (CONSTRAINT_LENGTH - 1 - i)) & 1 for i in range(CONSTRAINT_LENGTH)]
        )
    next_state = np.zeros((2, NUM_STATES), dtype=np.int64)
    out_bits = np.zeros((2, NUM_STATES, 2), dtype=np.int64)
    for s in range(NUM_STATES):
        reg_tail = [(s >> (CODE_MEMORY - 1 - i)) & 1 for i in range(CODE_MEMORY)]
        for b in range(2):
            reg = [b] + reg_tail
            for j in range(2):
                out_bits[b, s, j] = sum(t * r for t, r in zip(taps[j], reg)) % 2
            next_state[b, s] = (b << (CODE_MEMORY - 1)) | (s >> 1)
    return next_state, out_bits


_NEXT_STATE, _OUT_BITS = _build_trellis()


def conv_encode(info_bits):
    """Encode information bits with the terminated rate-1/2 code.

    Parameters
    ----------
    info_bits : (K,) array_like of {0, 1}

    Returns
    -------
    (2*(K + 2),) int8 ndarray
        Coded bits in output order [out_a[0], out_b[0], out_a[1], ...],
        including the two zero-tail trellis steps.
    """
    bits = np.asarray(info_bits)
    if bits.ndim != 1 or bits.size < 1:
        raise ValueError("info_bits must be a non-empty 1-d array")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("info_bits must contain only 0s and 1s")
    x = np.concatenate([bits.astype(np.int64), np.zeros(CODE_MEMORY, dtype=np.int64)])
    out = np.empty((x.size, 2), dtype=np.int8)
    for j, poly in enumerate(CODE_POLYNOMIALS):
        taps = np.array(
            [(poly >> (CONSTRAINT_LENGTH - 1 - i)) & 1 for i in range(CONSTRAINT_LENGTH)],
            dtype=np.int64,
        )
        out[:, j] = np.convolve(x, taps)[: x.size] % 2
    return out.reshape(-1)


def make_interleaver(length, rng):
    """Random permutation of the given length drawn from ``rng``."""
    if length < 1:
        raise ValueError("length must be positive")
    return rng.permutation(length)


def interleave(values, permutation):
    """Reorder ``values`` so that output k equals input permutation[k]."""
    values = np.asarray(values)
    permutation = np.asarray(permutation)
    if values.shape[0] != permutation.shape[0]:
        raise ValueError("values and permutation lengths differ")
    return values[permutation]


def deinterleave(values, permutation):
    """Inverse of :func:`interleave` for the same permutation."""
    values = np.asarray(values)
    permutation = np.asarray(permutation)
    if values.shape[0] != permutation.shape[0]:
        raise ValueError("values and permutation lengths differ")
    out = np.empty_like(values)
    out[permutation] = values
    return out


@dataclass(frozen=True)
class Constellation:
    """Complex constellation with per-point bit labels.

    Attributes
    ----------
    points : (Q,) complex ndarray, unit average energy.
    labels : (Q, bits_per_symbol) int8 ndarray; row i is the bit pattern
        of point i.  Points are ordered by their integer label so that
        ties in metric comparisons resolve toward the smaller label.
    """

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.complex128)
        labels = np.asarray(self.labels, dtype=np.int8)
        if points.ndim != 1 or points.size < 2:
            raise ValueError("need at least two constellation points")
        if labels.shape != (points.size, int(np.log2(points.size))):
            raise ValueError("labels shape must be (Q, log2(Q))")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)

    @property
    def bits_per_symbol(self):
        return self.labels.shape[1]


def qpsk():
    """Gray-labeled QPSK with unit symbol energy.

    Bits (b0, b1) map to ((1 - 2*b0) + 1j*(1 - 2*b1)) / sqrt(2): the first
    bit selects the sign of the real part, the second the imaginary part.
    """
    labels = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int8)
    points = ((1 - 2 * labels[:, 0]) + 1j * (1 - 2 * labels[:, 1])) / np.sqrt(2.0)
    return Constellation(points=points, labels=labels)


def map_symbols(bits, constellation, grid_shape):
    """Map interleaved coded bits onto a DD grid of symbols.

    Bits are consumed ``bits_per_symbol`` at a time in vectorization
    order (delay index fastest).
    """
    bits = np.asarray(bits)
    m_len, n_len = grid_shape
    bps = constellation.bits_per_symbol
    if bits.size != m_len * n_len * bps:
        raise ValueError(
            f"bit count {bits.size} does not fill a {m_len}x{n_len} grid "
            f"at {bps} bits per symbol"
        )
    groups = bits.reshape(-1, bps).astype(np.int64)
    index = np.zeros(groups.shape[0], dtype=np.int64)
    for j in range(bps):
        index = (index << 1) | groups[:, j]
    return constellation.points[index].reshape(m_len, n_len)


def maxlog_bit_llrs(metrics, labels):
    """Per-bit max-log LLRs from per-point distance metrics.

    Parameters
    ----------
    metrics : (n, Q) ndarray
        Smaller is more likely (squared-distance style).
    labels : (Q, bps) ndarray of {0, 1}.

    Returns
    -------
    (n, bps) float ndarray, positive favoring bit 0.
    """
    metrics = np.asarray(metrics, dtype=np.float64)
    bps = labels.shape[1]
    out = np.empty((metrics.shape[0], bps))
    for j in range(bps):
        ones = labels[:, j] == 1
        out[:, j] = metrics[:, ones].min(axis=1) - metrics[:, ~ones].min(axis=1)
    return out


@njit(cache=True)
def _bcjr_kernel(step_llrs, n_info, next_state, out_bits):
    """Exact log-MAP forward-backward pass over the terminated trellis.

    step_llrs has shape (T, 2): per-step channel LLRs for both coded
    bits, T = n_info + tail steps.  Tail steps admit only input 0.
    Returns (info_llrs, app_coded) where app_coded holds posterior LLRs
    for every coded bit in output order.
    """
    n_steps = step_llrs.shape[0]
    n_states = next_state.shape[1]
    half = LOG_ZERO / 2.0

    alpha = np.full((n_steps + 1, n_states), LOG_ZERO)
    alpha[0, 0] = 0.0
    for k in range(n_steps):
        n_inputs = 2 if k < n_info else 1
        for s in range(n_states):
            a = alpha[k, s]
            if a <= half:
                continue
            for b in range(n_inputs):
                gamma = 0.0
                for j in range(2):
                    gamma += 0.5 * step_llrs[k, j] * (1.0 - 2.0 * out_bits[b, s, j])
                ns = next_state[b, s]
                cand = a + gamma
                cur = alpha[k + 1, ns]
                if cur <= half:
                    alpha[k + 1, ns] = cand
                else:
                    hi = cur if cur > cand else cand
                    lo = cand if cur > cand else cur
                    alpha[k + 1, ns] = hi + np.log1p(np.exp(lo - hi))
        mx = alpha[k + 1, 0]
        for s in range(1, n_states):
            if alpha[k + 1, s] > mx:
                mx = alpha[k + 1, s]
        for s in range(n_states):
            if alpha[k + 1, s] > half:
                alpha[k + 1, s] -= mx

    beta = np.full((n_steps + 1, n_states), LOG_ZERO)
    beta[n_steps, 0] = 0.0
    for k in range(n_steps - 1, -1, -1):
        n_inputs = 2 if k < n_info else 1
        for s in range(n_states):
            acc = LOG_ZERO
            for b in range(n_inputs):
                nb = beta[k + 1, next_state[b, s]]
                if nb <= half:
                    continue
                gamma = 0.0
                for j in range(2):
                    gamma += 0.5 * step_llrs[k, j] * (1.0 - 2.0 * out_bits[b, s, j])
                cand = nb + gamma
                if acc <= half:
                    acc = cand
                else:
                    hi = acc if acc > cand else cand
                    lo = cand if acc > cand else acc
                    acc = hi + np.log1p(np.exp(lo - hi))
            beta[k, s] = acc
        mx = beta[k, 0]
        for s in range(1, n_states):
            if beta[k, s] > mx:
                mx = beta[k, s]
        if mx > half:
            for s in range(n_states):
                if beta[k, s] > half:
                    beta[k, s] -= mx

    info_llrs = np.zeros(n_info)
    app_coded = np.zeros(n_steps * 2)
    for k in range(n_steps):
        n_inputs = 2 if k < n_info else 1
        num_in = np.full(2, LOG_ZERO)
        num_out = np.full((2, 2), LOG_ZERO)
        for s in range(n_states):
            a = alpha[k, s]
            if a <= half:
                continue
            for b in range(n_inputs):
                nb = beta[k + 1, next_state[b, s]]
                if nb <= half:
                    continue
                gamma = 0.0
                for j in range(2):
                    gamma += 0.5 * step_llrs[k, j] * (1.0 - 2.0 * out_bits[b, s, j])
                metric = a + gamma + nb
                if num_in[b] <= half:
                    num_in[b] = metric
                else:
                    hi = num_in[b] if num_in[b] > metric else metric
                    lo = metric if num_in[b] > metric else num_in[b]
                    num_in[b] = hi + np.log1p(np.exp(lo - hi))
                for j in range(2):
                    c = out_bits[b, s, j]
                    if num_out[j, c] <= half:
                        num_out[j, c] = metric
                    else:
                        hi = num_out[j, c] if num_out[j, c] > metric else metric
                        lo = metric if num_out[j, c] > metric else num_out[j, c]
                        num_out[j, c] = hi + np.log1p(np.exp(lo - hi))
        if k < n_info:
            info_llrs[k] = num_in[0] - num_in[1]
        for j in range(2):
            zero = num_out[j, 0]
            one = num_out[j, 1]
            if one <= half:
                app_coded[2 * k + j] = -LOG_ZERO
            elif zero <= half:
                app_coded[2 * k + j] = LOG_ZERO
            else:
                app_coded[2 * k + j] = zero - one
    return info_llrs, app_coded


def bcjr_decode(coded_llrs):
    """Soft-in soft-out decoding of the terminated rate-1/2 code.

    Parameters
    ----------
    coded_llrs : (2*(K + 2),) array_like
        Channel LLRs for the coded bits in encoder output order.

    Returns
    -------
    info_llrs : (K,) ndarray
        Posterior LLRs of the information bits.
    extrinsic : (2*(K + 2),) ndarray
        Posterior coded-bit LLRs minus the channel input (extrinsic part).
    """
    llrs = np.asarray(coded_llrs, dtype=np.float64)
    if llrs.ndim != 1 or llrs.size % 2 != 0:
        raise ValueError("coded_llrs must be 1-d with even length")
    n_steps = llrs.size // 2
    n_info = n_steps - CODE_MEMORY
    if n_info < 1:
        raise ValueError("too few coded bits for the terminated trellis")
    if not np.all(np.isfinite(llrs)):
        raise ValueError("coded_llrs must be finite")
    step_llrs = llrs.reshape(n_steps, 2)
    info_llrs, app_coded = _bcjr_kernel(step_llrs, n_info, _NEXT_STATE, _OUT_BITS)
    extrinsic = app_coded - llrs
    return info_llrs, extrinsic


def soft_symbols(extrinsic_llrs, permutation, constellation, grid_shape):
    """Expected symbol values from extrinsic coded-bit LLRs.

    The coded-order LLRs are interleaved back to transmission order,
    converted to per-bit probabilities, and combined into the posterior
    mean of each constellation symbol.

    Returns
    -------
    (M, N) complex ndarray of soft symbols.
    """
    llrs = np.asarray(extrinsic_llrs, dtype=np.float64)
    m_len, n_len = grid_shape
    bps = constellation.bits_per_symbol
    if llrs.size != m_len * n_len * bps:
        raise ValueError("LLR count does not fill the grid")
    sym_llrs = interleave(llrs, permutation).reshape(-1, bps)
    # P(bit = 0) from the sign convention; clipping keeps exp() finite.
    p0 = 1.0 / (1.0 + np.exp(-np.clip(sym_llrs, -700, 700)))
    weights = np.ones((sym_llrs.shape[0], constellation.points.size))
    for j in range(bps):
        col = p0[:, j][:, None]
        weights *= np.where(constellation.labels[None, :, j] == 0, col, 1.0 - col)
    return (weights @ constellation.points).reshape(m_len, n_len)


@dataclass(frozen=True)
class DecodeResult:
    info_llrs: np.ndarray
    info_bits: np.ndarray
    extrinsic: np.ndarray


class CodingChain:
    """Frame-level glue: encoder, interleaver, mapper, decoder.

    One instance is tied to a grid shape, a constellation, and one
    realization of the random interleaver.
    """

    def __init__(self, grid_shape, constellation, permutation):
        m_len, n_len = grid_shape
        bps = constellation.bits_per_symbol
        n_coded = m_len * n_len * bps
        if n_coded % 2 != 0:
            raise ValueError("coded-bit count must be even for a rate-1/2 code")
        permutation = np.asarray(permutation)
        if permutation.shape != (n_coded,):
            raise ValueError(f"permutation must have length {n_coded}")
        self.grid_shape = (m_len, n_len)
        self.constellation = constellation
        self.permutation = permutation
        self.n_coded_bits = n_coded
        self.n_info_bits = n_coded // 2 - CODE_MEMORY

    def encode_to_grid(self, info_bits):
        """Encode, interleave, and map one frame of information bits."""
        bits = np.asarray(info_bits)
        if bits.shape != (self.n_info_bits,):
            raise ValueError(f"expected {self.n_info_bits} information bits")
        coded = conv_encode(bits)
        tx_bits = interleave(coded, self.permutation)
        return map_symbols(tx_bits, self.constellation, self.grid_shape)

    def decode(self, symbol_order_llrs):
        """Decode detector LLRs given in transmitted (symbol) order.

        Returns a :class:`DecodeResult` with posterior information LLRs,
        hard information bits, and extrinsic coded-bit LLRs (in coded
        order) for soft-symbol feedback.
        """
        llrs = np.asarray(symbol_order_llrs, dtype=np.float64).ravel()
        if llrs.size != self.n_coded_bits:
            raise ValueError(f"expected {self.n_coded_bits} LLRs")
        coded_llrs = deinterleave(llrs, self.permutation)
        info_llrs, extrinsic = bcjr_decode(coded_llrs)
        info_bits = (info_llrs < 0).astype(np.int8)
        return DecodeResult(info_llrs=info_llrs, info_bits=info_bits, extrinsic=extrinsic)

    def soft_symbol_grid(self, extrinsic):
        """Soft symbols for interference reconstruction."""
        return soft_symbols(extrinsic, self.permutation, self.constellation, self.grid_shape)
