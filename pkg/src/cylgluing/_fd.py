"""Finite-difference and interpolation kernels on uniform grids.

Order-8 stencils throughout: a p-th derivative uses a Fornberg stencil of
width p+8 (widened to keep it odd), centered where possible and shifted
one-sided near the ends of the grid.
"""

from functools import lru_cache

import numpy as np
from scipy import sparse


def fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Weights of derivatives 0..m at point z for nodes x (Fornberg 1988).

    Returns an array c of shape (len(x), m+1); c[:, k] reproduces the k-th
    derivative at z exactly on polynomials of degree < len(x).
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def stencil_width(p: int) -> int:
    """Stencil width for the p-th derivative at interior accuracy 8."""
    w = p + 8
    if w % 2 == 0:
        w += 1
    return w


@lru_cache(maxsize=None)
def diff_matrix(n: int, h: float, p: int) -> sparse.csr_matrix:
    """Sparse n x n matrix of the p-th s-derivative, one-sided at the edges.

    p = 0 returns the identity.  The grid must satisfy n >= stencil width.
    """
    if p == 0:
        return sparse.identity(n, format="csr")
    w = stencil_width(p)
    if n < w:
        raise ValueError(f"grid too short for order-8 stencil: n={n} < {w}")
    half = (w - 1) // 2
    rows = np.empty(n * w, dtype=np.int64)
    cols = np.empty(n * w, dtype=np.int64)
    data = np.empty(n * w)
    # Distinct stencils occur only near the two edges; interior rows share one.
    cache = {}
    for i in range(n):
        start = min(max(i - half, 0), n - w)
        off = i - start
        if off not in cache:
            nodes = (np.arange(w) - off) * h
            cache[off] = fornberg_weights(0.0, nodes, p)[:, p]
        rows[i * w:(i + 1) * w] = i
        cols[i * w:(i + 1) * w] = start + np.arange(w)
        data[i * w:(i + 1) * w] = cache[off]
    return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))


def apply_s_derivative(values: np.ndarray, h: float, p: int) -> np.ndarray:
    """Apply the p-th s-derivative along axis 0 of values."""
    if p == 0:
        return values.copy()
    n = values.shape[0]
    D = diff_matrix(n, h, p)
    flat = values.reshape(n, -1)
    out = D @ flat
    return out.reshape(values.shape)


INTERP_WIDTH = 9


def interp_rows(s_query: np.ndarray, s_lo: float, h: float, n: int):
    """Order-8 interpolation stencils for points s_query on a uniform grid.

    Returns (start, weights): start[i] is the first node index of a 9-point
    stencil clamped inside the grid and weights[i, :] are the Lagrange basis
    values there.  Queries must lie inside [s_lo, s_lo + (n-1) h] up to a
    small tolerance.
    """
    s_query = np.atleast_1d(np.asarray(s_query, dtype=float))
    w = INTERP_WIDTH
    if n < w:
        raise ValueError(f"grid too short for order-8 interpolation: n={n}")
    pos = (s_query - s_lo) / h
    tol = 1e-9
    if np.any(pos < -tol) or np.any(pos > n - 1 + tol):
        raise ValueError("interpolation query outside the stored s-window")
    pos = np.clip(pos, 0.0, n - 1)
    half = (w - 1) // 2
    start = np.clip(np.rint(pos).astype(np.int64) - half, 0, n - w)
    d = pos - start  # local coordinate in [0, w-1]
    # Barycentric form on uniform nodes 0..w-1; exact hits handled separately.
    j = np.arange(w)
    bary = np.array([(-1.0) ** k * _binom(w - 1, k) for k in j])
    diff = d[:, None] - j[None, :]
    exact = np.abs(diff) < 1e-13
    weights = np.empty((s_query.size, w))
    safe = np.where(exact, 1.0, diff)
    terms = bary[None, :] / safe
    weights[:] = terms / terms.sum(axis=1)[:, None]
    hit_rows = exact.any(axis=1)
    if np.any(hit_rows):
        weights[hit_rows] = np.where(exact[hit_rows], 1.0, 0.0)
    return start, weights


def _binom(n: int, k: int) -> float:
    out = 1.0
    for i in range(k):
        out = out * (n - i) / (i + 1)
    return out


def interpolate_s(values: np.ndarray, s_lo: float, h: float,
                  s_query: np.ndarray) -> np.ndarray:
    """Interpolate values (axis 0 is s) at the points s_query, order 8."""
    n = values.shape[0]
    start, wts = interp_rows(s_query, s_lo, h, n)
    idx = start[:, None] + np.arange(INTERP_WIDTH)[None, :]
    gathered = values[idx]  # (m, 9, ...)
    return np.einsum("qw,qw...->q...", wts, gathered)


@lru_cache(maxsize=None)
def spectral_diff_matrix(n_t: int, p: int) -> np.ndarray:
    """Dense complex n_t x n_t matrix of the p-th t-derivative on [0,1).

    Acts on complex-valued samples; frequencies run over 0..n/2, -n/2+1..-1
    with the Nyquist mode assigned the positive frequency.
    """
    k = np.fft.fftfreq(n_t, d=1.0 / n_t)
    if n_t % 2 == 0:
        k = k.copy()
        k[n_t // 2] = n_t // 2
    diag = (2j * np.pi * k) ** p
    F = np.fft.fft(np.eye(n_t), axis=0)
    return np.fft.ifft(diag[:, None] * F, axis=0)


def apply_t_derivative(values: np.ndarray, p: int) -> np.ndarray:
    """Apply the p-th t-derivative along axis 1 of real values, spectrally.

    For odd p the Nyquist mode is annihilated, keeping the output real and
    the operator skew-adjoint; even p keeps it.
    """
    if p == 0:
        return values.copy()
    n_t = values.shape[1]
    if n_t == 1:
        return np.zeros_like(values)
    vhat = np.fft.rfft(values, axis=1)
    k = np.arange(vhat.shape[1], dtype=float)
    mult = (2j * np.pi * k) ** p
    if n_t % 2 == 0 and p % 2 == 1:
        mult[-1] = 0.0
    shape = [1] * values.ndim
    shape[1] = vhat.shape[1]
    vhat = vhat * mult.reshape(shape)
    return np.fft.irfft(vhat, n=n_t, axis=1)


def shift_t(values: np.ndarray, theta: float) -> np.ndarray:
    """Evaluate values at t + theta along axis 1, spectrally.

    Exact for band-limited data; an integer grid shift reduces to a roll.
    """
    n_t = values.shape[1]
    if n_t == 1 or theta == 0.0:
        return values.copy()
    steps = theta * n_t
    if abs(steps - round(steps)) < 1e-12:
        return np.roll(values, -int(round(steps)) % n_t, axis=1)
    vhat = np.fft.rfft(values, axis=1)
    k = np.arange(vhat.shape[1], dtype=float)
    phase = np.exp(2j * np.pi * k * theta)
    if n_t % 2 == 0:
        # Real-signal convention: the Nyquist mode shifts as a cosine.
        phase[-1] = np.cos(2.0 * np.pi * k[-1] * theta)
    shape = [1] * values.ndim
    shape[1] = vhat.shape[1]
    vhat = vhat * phase.reshape(shape)
    return np.fft.irfft(vhat, n=n_t, axis=1)


def eval_at_points(values: np.ndarray, s_lo: float, h: float,
                   s_query: np.ndarray, t_query: np.ndarray,
                   chunk: int = 8192) -> np.ndarray:
    """Evaluate a grid sample at scattered points, order 8 in s, exact in t.

    values has shape (n_s, n_t, ...); s_query and t_query are flat arrays of
    equal length.  The t-interpolant is the trigonometric polynomial of the
    data, so the result is exact for band-limited fields.
    """
    s_query = np.asarray(s_query, dtype=float).ravel()
    t_query = np.asarray(t_query, dtype=float).ravel()
    n_s, n_t = values.shape[:2]
    tail = values.shape[2:]
    if n_t == 1:
        out = interpolate_s(values[:, 0], s_lo, h, s_query)
        return out.reshape((s_query.size,) + tail)
    vhat = np.fft.rfft(values, axis=1) / n_t
    n_k = vhat.shape[1]
    scale = np.ones(n_k)
    scale[1:] = 2.0
    if n_t % 2 == 0:
        scale[-1] = 1.0
    shape = [1] * vhat.ndim
    shape[1] = n_k
    vhat = vhat * scale.reshape(shape)
    k = np.arange(n_k, dtype=float)
    out = np.empty((s_query.size,) + tail)
    for lo in range(0, s_query.size, chunk):
        hi = min(lo + chunk, s_query.size)
        start, wts = interp_rows(s_query[lo:hi], s_lo, h, n_s)
        idx = start[:, None] + np.arange(INTERP_WIDTH)[None, :]
        modes = np.einsum("qw,qwk...->qk...", wts, vhat[idx])
        phase = np.exp(2j * np.pi * np.multiply.outer(t_query[lo:hi], k))
        if n_t % 2 == 0:
            phase[:, -1] = np.cos(2.0 * np.pi * k[-1] * t_query[lo:hi])
        out[lo:hi] = np.einsum("qk,qk...->q...", phase, modes).real
    return out


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    """Composite trapezoid quadrature weights on n uniform nodes."""
    w = np.full(n, h)
    w[0] = 0.5 * h
    w[-1] = 0.5 * h
    return w


# Euler-Maclaurin coefficients B_{2k}/(2k)! for k = 1, 2, 3.
_EM_COEFF = (1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0)


def gregory_weights(n: int, h: float) -> np.ndarray:
    """End-corrected trapezoid weights, O(h^8) accurate for smooth data.

    The Euler-Maclaurin boundary terms c_k h^{2k} (f^{(2k-1)}(b) -
    f^{(2k-1)}(a)), k <= 3, are subtracted using 9-point one-sided
    stencils, leaving an O(h^8) remainder.  Falls back to plain trapezoid
    when the segment is too short to carry the stencils.
    """
    w = trapezoid_weights(n, h)
    if n < 9:
        return w
    nodes = np.arange(9.0)
    for k, c in enumerate(_EM_COEFF, start=1):
        p = 2 * k - 1
        lw = fornberg_weights(0.0, nodes, p)[:, p] / h ** p
        rw = fornberg_weights(8.0, nodes, p)[:, p] / h ** p
        w[:9] += (c * h ** (2 * k)) * lw
        w[-9:] -= (c * h ** (2 * k)) * rw
    return w
