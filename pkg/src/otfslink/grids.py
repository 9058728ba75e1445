"""Grid transforms between the time-frequency and delay-Doppler domains.

Conventions used throughout the package:

- A time-frequency (TF) grid is a complex array of shape ``(M, N)`` indexed
  ``[m, q]`` where ``m`` is the time-slot index and ``q`` the subcarrier
  index.
- A delay-Doppler (DD) grid is a complex array of shape ``(M, N)`` indexed
  ``[n, p]`` where ``n`` is the Doppler index and ``p`` the delay index.
- Vectorization is C-order raveling, i.e. the second index runs fastest:
  TF vectors enumerate subcarriers within each time slot, DD vectors
  enumerate delay bins within each Doppler bin.

Two transform pairs are provided.  The channel-analysis pair
(:func:`dsft` / :func:`idsft`) is asymmetric: the forward transform carries
no scale factor and the inverse carries ``1/(M*N)``.  The data-spreading
pair (:func:`spread` / :func:`despread`) splits the scale factor evenly so
that both directions are unitary.
"""

import numpy as np

from .errors import ConfigurationError

# Largest M*N for which dense (MN x MN) operator matrices may be built.
DENSE_OPERATOR_LIMIT = 4096


def _as_grid(a, name="grid"):
    arr = np.asarray(a)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr.astype(np.complex128, copy=False)


def dsft(dd_grid):
    """Forward transform from the delay-Doppler to the time-frequency domain.

    Parameters
    ----------
    dd_grid : (M, N) array_like
        Delay-Doppler grid indexed ``[n, p]``.

    Returns
    -------
    (M, N) ndarray
        Time-frequency grid ``X[m, q] = sum_{n,p} s[n, p]
        exp(j 2 pi (m n / M - q p / N))``.
    """
    s = _as_grid(dd_grid, "dd_grid")
    m_len = s.shape[0]
    # ifft along axis 0 supplies exp(+j2pi mn/M)/M; fft along axis 1
    # supplies exp(-j2pi qp/N).  Rescale to remove the 1/M.
    return np.fft.fft(np.fft.ifft(s, axis=0), axis=1) * m_len


def idsft(tf_grid):
    """Inverse of :func:`dsft`, carrying the full ``1/(M*N)`` scale.

    Parameters
    ----------
    tf_grid : (M, N) array_like
        Time-frequency grid indexed ``[m, q]``.

    Returns
    -------
    (M, N) ndarray
        Delay-Doppler grid ``s[n, p] = (1/(M N)) sum_{m,q} X[m, q]
        exp(-j 2 pi (m n / M - q p / N))``.
    """
    x = _as_grid(tf_grid, "tf_grid")
    m_len = x.shape[0]
    return np.fft.ifft(np.fft.fft(x, axis=0), axis=1) / m_len


def spread(dd_grid):
    """Unitary spreading of delay-Doppler data onto the TF grid.

    Equals ``dsft(dd_grid) / sqrt(M*N)``; preserves Frobenius norm.
    """
    s = _as_grid(dd_grid, "dd_grid")
    m_len, n_len = s.shape
    return dsft(s) / np.sqrt(m_len * n_len)


def despread(tf_grid):
    """Unitary inverse of :func:`spread`.

    Equals ``sqrt(M*N) * idsft(tf_grid)``.
    """
    x = _as_grid(tf_grid, "tf_grid")
    m_len, n_len = x.shape
    return idsft(x) * np.sqrt(m_len * n_len)


def basis_column(m_len, n_len, omega):
    """TF-domain image of the DD unit impulse at flat index ``omega``.

    Returns the (M, N) grid equal to ``spread(e_omega)`` where ``e_omega``
    is one at DD position ``(omega // N, omega % N)`` and zero elsewhere.
    Computed directly from the exponential form, which is cheaper and
    exact for a single impulse.
    """
    if not (0 <= omega < m_len * n_len):
        raise ValueError(f"omega={omega} outside grid of size {m_len * n_len}")
    n_idx, p_idx = divmod(int(omega), n_len)
    m = np.arange(m_len)[:, None]
    q = np.arange(n_len)[None, :]
    phase = np.exp(2j * np.pi * (m * n_idx / m_len - q * p_idx / n_len))
    return phase / np.sqrt(m_len * n_len)


def build_spreading_matrix(m_len, n_len):
    """Dense unitary spreading matrix S of shape (MN, MN).

    ``S @ vec(dd_grid) == vec(spread(dd_grid))`` for the C-order
    vectorization.  Dense construction is only permitted for small grids.
    """
    if m_len < 1 or n_len < 1:
        raise ValueError("grid dimensions must be positive")
    mn = m_len * n_len
    if mn > DENSE_OPERATOR_LIMIT:
        raise ConfigurationError(
            f"dense spreading matrix for M*N={mn} exceeds the "
            f"limit of {DENSE_OPERATOR_LIMIT}"
        )
    m = np.arange(m_len)
    q = np.arange(n_len)
    # Time axis: inverse-DFT style (positive exponent); frequency axis:
    # forward-DFT style (negative exponent).  Both unitary.
    a = np.exp(2j * np.pi * np.outer(m, m) / m_len) / np.sqrt(m_len)
    b = np.exp(-2j * np.pi * np.outer(q, q) / n_len) / np.sqrt(n_len)
    return np.kron(a, b)


class DDChannelOperator:
    """Delay-Doppler image of a pointwise TF channel.

    For a TF response ``g`` the operator is ``G = S^H diag(vec(g)) S`` with
    ``S`` the unitary spreading matrix, i.e. applying it to DD data and
    spreading the result to TF equals the pointwise product of ``g`` with
    the spread data.  Columns are materialized lazily; the dense matrix is
    gated by :data:`DENSE_OPERATOR_LIMIT`.
    """

    def __init__(self, tf_response):
        g = _as_grid(tf_response, "tf_response")
        self.tf_response = g
        self.m_len, self.n_len = g.shape
        self.size = self.m_len * self.n_len

    def apply_grid(self, dd_grid):
        """Apply the operator to a DD grid, returning a DD grid."""
        d = _as_grid(dd_grid, "dd_grid")
        if d.shape != self.tf_response.shape:
            raise ValueError(
                f"grid shape {d.shape} does not match operator shape "
                f"{self.tf_response.shape}"
            )
        return despread(self.tf_response * spread(d))

    def apply(self, dd_vec):
        """Apply the operator to a vectorized DD grid."""
        v = np.asarray(dd_vec)
        if v.shape != (self.size,):
            raise ValueError(f"expected vector of length {self.size}")
        out = self.apply_grid(v.reshape(self.m_len, self.n_len))
        return out.ravel()

    def column(self, omega):
        """Column ``omega`` of the dense operator, without building it."""
        col_tf = self.tf_response * basis_column(self.m_len, self.n_len, omega)
        return despread(col_tf).ravel()

    def matrix(self):
        """Dense (MN, MN) operator matrix.  Gated for small grids only."""
        if self.size > DENSE_OPERATOR_LIMIT:
            raise ConfigurationError(
                f"dense operator for M*N={self.size} exceeds the "
                f"limit of {DENSE_OPERATOR_LIMIT}"
            )
        cols = np.empty((self.size, self.size), dtype=np.complex128)
        for omega in range(self.size):
            cols[:, omega] = self.column(omega)
        return cols


def build_dd_channel_operator(tf_response):
    """Construct the DD-domain operator for a TF pointwise response."""
    return DDChannelOperator(tf_response)
