"""Gluing and anti-gluing of function pairs across a long cylindrical neck.

A gluing parameter a with modulus r and angle theta opens a neck of length
R = e^{1/r} - e.  Plain gluing interpolates a pair (u^+, u^-) across the
seam at R/2 with a smooth cutoff,

    (glue u)(s, t) = beta_a(s) u^+(s, t) + (1 - beta_a(s)) u^-(s - R, t - theta),

anti-gluing stores the complementary combination on the infinite window
[R - S, S], and the pair (glue, antiglue) is inverted exactly by
total_unglue.  Composing the two transports gives the splicing projection
pi_a and the retraction rho_a whose images are the pairs that actually
descend to the glued cylinder.

All seam positions are grid stations: R and R/2 must be multiples of the
s-step (seam lengths are snapped within 1e-6), and the neck must satisfy
2 <= R <= 2S - 2 so each cutoff transition zone stays inside the data
windows.  The cutoff is exactly 0 and 1 outside its transition zone, which
makes the masked assembly below exact rather than approximate.
"""

from dataclasses import dataclass

import numpy as np

from . import _fd
from .fnspace import (AsymptoticPair, CylinderGrid, GridFunction, SobolevSpec,
                      WeightSequence, average_at, function_norm_sq)
from .profile import GluingParameter, glue_params

# Fixed quadrature for the cutoff integral: 256 panels on [-1, 0], 12-point
# Gauss-Legendre on each, cumulative sums precomputed at import.
_PANELS = 256
_PANEL_W = 1.0 / _PANELS
_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def bump(x) -> np.ndarray:
    """Even bump e^{-1/(1-x^2)} on (-1, 1), exactly zero outside."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    with np.errstate(over="ignore"):
        out[inside] = np.exp(-1.0 / (1.0 - xi * xi))
    return out


def _panel_cumulative() -> np.ndarray:
    edges = -1.0 + _PANEL_W * np.arange(_PANELS + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * _PANEL_W
    nodes = mids[:, None] + half * _GL_X[None, :]
    vals = bump(nodes) @ _GL_W * half
    return np.concatenate([[0.0], np.cumsum(vals)])


_CUM = _panel_cumulative()
_G0 = _CUM[-1]                  # integral of the bump over [-1, 0]
BUMP_INTEGRAL = 2.0 * _G0       # full integral over (-1, 1)


def _bump_cumulative(x: np.ndarray) -> np.ndarray:
    """Integral of the bump from -1 to x, for x in [-1, 0]."""
    pos = (x + 1.0) / _PANEL_W
    idx = np.minimum(pos.astype(int), _PANELS - 1)
    x0 = -1.0 + idx * _PANEL_W
    half = 0.5 * (x - x0)
    nodes = (x0 + half)[:, None] + half[:, None] * _GL_X[None, :]
    partial = (bump(nodes) * _GL_W[None, :]).sum(axis=1) * half
    return _CUM[idx] + partial


def cutoff_beta(x) -> np.ndarray:
    """Normalized decreasing cutoff: 1 below -1, 1/2 at 0, 0 above 1.

    beta is the bump's normalized complementary integral; values for x > 0
    are produced by the reflection beta(x) = 1 - beta(-x), so the symmetry
    holds exactly in floating point.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty(x.shape)
    out[x <= -1.0] = 1.0
    out[x >= 1.0] = 0.0
    out[x == 0.0] = 0.5
    left = (x > -1.0) & (x < 0.0)
    right = (x > 0.0) & (x < 1.0)
    out[left] = 1.0 - _bump_cumulative(x[left]) / BUMP_INTEGRAL
    out[right] = 1.0 - (1.0 - _bump_cumulative(-x[right]) / BUMP_INTEGRAL)
    return float(out[0]) if scalar else out


def cutoff_beta_prime(x) -> np.ndarray:
    """Closed-form derivative of cutoff_beta: -bump(x) / integral."""
    return -bump(x) / BUMP_INTEGRAL


@dataclass(frozen=True)
class SeamGeometry:
    """Grid-aligned seam bookkeeping shared by all gluing operators."""

    R: float
    theta: float
    h_s: float
    n_t: int
    S: float
    m_R: int
    m_S: int

    @property
    def finite_grid(self) -> CylinderGrid:
        return CylinderGrid.finite(self.R, self.h_s, self.n_t)

    @property
    def window_grid(self) -> CylinderGrid:
        return CylinderGrid.glued_window(self.R, self.S, self.h_s, self.n_t)

    def beta(self, grid: CylinderGrid) -> np.ndarray:
        return cutoff_beta(grid.s_nodes - 0.5 * self.R)

    def beta_prime(self, grid: CylinderGrid) -> np.ndarray:
        return cutoff_beta_prime(grid.s_nodes - 0.5 * self.R)


def seam_geometry(a, pair: AsymptoticPair) -> SeamGeometry:
    """Validate and snap the seam data of a gluing parameter to the grid."""
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        raise ValueError("a = 0 opens no seam")
    g = pair.r_plus.grid
    S, h = g.s_hi, g.h_s
    steps = gp.R / h
    m_R = int(round(steps))
    if abs(steps - m_R) * h > 1e-6:
        raise ValueError(f"seam length R = {gp.R} must be a multiple of "
                         f"h_s = {h} (off by {abs(steps - m_R) * h:.2e})")
    if m_R % 2 != 0:
        raise ValueError("half seam R/2 must also land on a grid station")
    R = m_R * h
    if R < 2.0 or R > 2.0 * S - 2.0:
        raise ValueError(f"seam length R = {R} outside [2, 2S - 2] for S = {S}; "
                         "the cutoff transition zone must fit the data windows")
    return SeamGeometry(R, gp.theta, h, g.n_t, S, m_R, int(round(S / h)))


def _shifted_minus(geo: SeamGeometry, values: np.ndarray) -> np.ndarray:
    """Samples of v(., . - theta) for a minus-side field v."""
    return _fd.shift_t(values, -geo.theta)


def seam_average(geo: SeamGeometry, pair: AsymptoticPair) -> np.ndarray:
    """av_a(r): mean of the two remainder circle averages at the seam."""
    ap = average_at(pair.r_plus, 0.5 * geo.R)
    am = average_at(pair.r_minus, -0.5 * geo.R)
    return 0.5 * (ap + am)


def _assemble_plus(geo: SeamGeometry, beta_fin: np.ndarray,
                   plus_vals: np.ndarray, minus_shifted: np.ndarray,
                   ncomp: int) -> np.ndarray:
    """beta * u^+ + (1 - beta) * u^-(. - R, . - theta) on [0, R]."""
    m_R, m_S = geo.m_R, geo.m_S
    out = np.zeros((m_R + 1, geo.n_t, ncomp))
    iu = min(m_S, m_R)
    out[: iu + 1] = beta_fin[: iu + 1, None, None] * plus_vals[: iu + 1]
    lo = max(0, m_R - m_S)
    out[lo:] += ((1.0 - beta_fin[lo:])[:, None, None]
                 * minus_shifted[lo - m_R + m_S: m_S + 1])
    return out


def glue(a, pair: AsymptoticPair):
    """Plain gluing: interpolate a common-constant pair across the seam.

    Returns a GridFunction on the finite cylinder [0, R] x S^1 (the pair
    itself when a = 0, where the cylinder never closes).
    """
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        return pair.copy()
    if not pair.is_E:
        raise ValueError("plain gluing needs matching asymptotic constants")
    geo = seam_geometry(gp, pair)
    beta_fin = geo.beta(geo.finite_grid)
    vals = _assemble_plus(geo, beta_fin, pair.plus_values(),
                          _shifted_minus(geo, pair.minus_values()),
                          pair.components)
    return GridFunction(geo.finite_grid, vals)


def hat_glue(a, pair: AsymptoticPair):
    """Gluing of the remainders alone, ignoring asymptotic constants."""
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        return pair.copy()
    geo = seam_geometry(gp, pair)
    beta_fin = geo.beta(geo.finite_grid)
    vals = _assemble_plus(geo, beta_fin, pair.r_plus.values,
                          _shifted_minus(geo, pair.r_minus.values),
                          pair.components)
    return GridFunction(geo.finite_grid, vals)


def _assemble_window(geo: SeamGeometry, plus_vals: np.ndarray,
                     minus_shifted: np.ndarray, ncomp: int,
                     coef_plus: np.ndarray, coef_minus: np.ndarray) -> np.ndarray:
    """coef_plus * u^+ + coef_minus * u^-(. - R, . - theta) on [R - S, S].

    Coefficients must vanish identically where the corresponding field has
    no data (guaranteed by the cutoff supports when 2 <= R <= 2S - 2).
    """
    m_R, m_S = geo.m_R, geo.m_S
    n_W = 2 * m_S - m_R + 1
    out = np.zeros((n_W, geo.n_t, ncomp))
    k0 = max(0, m_S - m_R)
    out[k0:] = (coef_plus[k0:, None, None]
                * plus_vals[m_R - m_S + k0: m_S + 1])
    k1 = min(m_S, 2 * m_S - m_R)
    out[: k1 + 1] += (coef_minus[: k1 + 1, None, None]
                      * minus_shifted[: k1 + 1])
    return out


def antiglue(a, pair: AsymptoticPair):
    """Anti-gluing: the seam-average-centered complementary combination.

    -(1 - beta_a)(u^+ - av) + beta_a (u^-(. - R, . - theta) - av) on the
    window [R - S, S] x S^1; None at a = 0, where nothing is anti-glued.
    """
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        return None
    if not pair.is_E:
        raise ValueError("plain anti-gluing needs matching asymptotic constants")
    geo = seam_geometry(gp, pair)
    beta_w = geo.beta(geo.window_grid)
    av = pair.c_plus + seam_average(geo, pair)
    up = pair.plus_values() - av[None, None, :]
    um = pair.minus_values() - av[None, None, :]
    vals = _assemble_window(geo, up, _shifted_minus(geo, um),
                            pair.components, -(1.0 - beta_w), beta_w)
    return GridFunction(geo.window_grid, vals)


def hat_antiglue(a, pair: AsymptoticPair):
    """Anti-gluing of the remainders alone: -(1 - beta_a) r^+ + beta_a r^-."""
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        return None
    geo = seam_geometry(gp, pair)
    beta_w = geo.beta(geo.window_grid)
    vals = _assemble_window(geo, pair.r_plus.values,
                            _shifted_minus(geo, pair.r_minus.values),
                            pair.components, -(1.0 - beta_w), beta_w)
    return GridFunction(geo.window_grid, vals)


def total_glue(a, pair: AsymptoticPair):
    """The isomorphism pair (glue, antiglue) applied at once."""
    return glue(a, pair), antiglue(a, pair)


def hat_total_glue(a, pair: AsymptoticPair):
    return hat_glue(a, pair), hat_antiglue(a, pair)


def _window_to_minus(geo: SeamGeometry, window_vals: np.ndarray) -> GridFunction:
    """Reindex a glued-window field to minus coordinates s' = s - R."""
    grid = CylinderGrid.half_minus(geo.S, geo.h_s, geo.n_t)
    vals = _fd.shift_t(window_vals[: geo.m_S + 1], geo.theta)
    return GridFunction(grid, vals)


def _fin_on_plus(geo: SeamGeometry, q_vals: np.ndarray, ncomp: int) -> np.ndarray:
    """q extended by zero from [0, R] to [0, S]; exact where beta = 0."""
    out = np.zeros((geo.m_S + 1, geo.n_t, ncomp))
    iu = min(geo.m_R, geo.m_S)
    out[: iu + 1] = q_vals[: iu + 1]
    return out


def _win_on_plus(geo: SeamGeometry, p_vals: np.ndarray, ncomp: int) -> np.ndarray:
    """p restricted/extended from [R - S, S] to [0, S]; exact where 1 - beta = 0."""
    out = np.zeros((geo.m_S + 1, geo.n_t, ncomp))
    lo = max(0, geo.m_R - geo.m_S)
    out[lo:] = p_vals[lo - geo.m_R + geo.m_S:]
    return out


def _fin_on_window(geo: SeamGeometry, q_vals: np.ndarray, ncomp: int) -> np.ndarray:
    """q on the window stations [R - S, R]; exact where 1 - beta = 0."""
    out = np.zeros((geo.m_S + 1, geo.n_t, ncomp))
    k0 = max(0, geo.m_S - geo.m_R)
    out[k0:] = q_vals[geo.m_R - geo.m_S + k0: geo.m_R + 1]
    return out


def total_unglue(a, q, p) -> AsymptoticPair:
    """Invert (glue, antiglue): recover the common-constant pair exactly.

    q lives on the finite cylinder [0, R], p on the window [R - S, S] (p
    may be a plain zero field).  The seam circle average [q] and the window
    asymptote p_inf determine the common constant [q] - p_inf; the fields
    are then separated by the pointwise 2x2 inversion with determinant
    gamma_a = beta_a^2 + (1 - beta_a)^2.
    """
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        return q.copy()
    grid_q = q.grid
    S = p.grid.s_hi
    h, n_t = grid_q.h_s, grid_q.n_t
    m_R, m_S = int(round(grid_q.s_hi / h)), int(round(S / h))
    geo = SeamGeometry(grid_q.s_hi, gp.theta, h, n_t, S, m_R, m_S)
    ncomp = q.components

    q_avg = average_at(q, 0.5 * geo.R)
    p_inf = average_at(p, S)
    c_out = q_avg - p_inf

    plus_grid = CylinderGrid.half_plus(S, h, n_t)
    beta_p = cutoff_beta(plus_grid.s_nodes - 0.5 * geo.R)
    gamma_p = beta_p ** 2 + (1.0 - beta_p) ** 2
    qv = _fin_on_plus(geo, q.values, ncomp)
    pv = _win_on_plus(geo, p.values, ncomp)
    bq = beta_p[:, None, None]
    gq = gamma_p[:, None, None]
    eta_plus = (bq * qv - (1.0 - bq) * pv) / gq \
        - ((1.0 - beta_p) * (2.0 * beta_p - 1.0) / gamma_p)[:, None, None] \
        * q_avg[None, None, :]

    # Minus-range stations R - S + k h for k = 0..m_S reach past the window
    # top when R > S; there beta = 0 exactly and p is not needed.
    win_s = (geo.R - S) + h * np.arange(m_S + 1)
    beta_w = cutoff_beta(win_s - 0.5 * geo.R)
    gamma_w = beta_w ** 2 + (1.0 - beta_w) ** 2
    qw = _fin_on_window(geo, q.values, ncomp)
    pw = np.zeros((m_S + 1, n_t, ncomp))
    kp = min(m_S, 2 * m_S - m_R)
    pw[: kp + 1] = p.values[: kp + 1]
    bw = beta_w[:, None, None]
    gw = gamma_w[:, None, None]
    eta_minus_tilde = ((1.0 - bw) * qw + bw * pw) / gw \
        + (beta_w * (2.0 * beta_w - 1.0) / gamma_w)[:, None, None] \
        * q_avg[None, None, :]

    r_plus = GridFunction(plus_grid, eta_plus - c_out[None, None, :])
    eta_minus = _window_to_minus(geo, eta_minus_tilde)
    r_minus = GridFunction(eta_minus.grid,
                           eta_minus.values - c_out[None, None, :])
    return AsymptoticPair(c_out, c_out.copy(), r_plus, r_minus)


def hat_unglue(a, q_hat, p_hat) -> AsymptoticPair:
    """Invert (hat_glue, hat_antiglue) on remainder pairs (zero constants)."""
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        return q_hat.copy()
    grid_q = q_hat.grid
    S = p_hat.grid.s_hi
    h, n_t = grid_q.h_s, grid_q.n_t
    m_R, m_S = int(round(grid_q.s_hi / h)), int(round(S / h))
    geo = SeamGeometry(grid_q.s_hi, gp.theta, h, n_t, S, m_R, m_S)
    ncomp = q_hat.components

    plus_grid = CylinderGrid.half_plus(S, h, n_t)
    beta_p = cutoff_beta(plus_grid.s_nodes - 0.5 * geo.R)
    gamma_p = beta_p ** 2 + (1.0 - beta_p) ** 2
    qv = _fin_on_plus(geo, q_hat.values, ncomp)
    pv = _win_on_plus(geo, p_hat.values, ncomp)
    bq = beta_p[:, None, None]
    xi_plus = (bq * qv - (1.0 - bq) * pv) / gamma_p[:, None, None]

    win_s = (geo.R - S) + h * np.arange(m_S + 1)
    beta_w = cutoff_beta(win_s - 0.5 * geo.R)
    gamma_w = beta_w ** 2 + (1.0 - beta_w) ** 2
    qw = _fin_on_window(geo, q_hat.values, ncomp)
    pw = np.zeros((m_S + 1, n_t, ncomp))
    kp = min(m_S, 2 * m_S - m_R)
    pw[: kp + 1] = p_hat.values[: kp + 1]
    bw = beta_w[:, None, None]
    xi_minus_tilde = ((1.0 - bw) * qw + bw * pw) / gamma_w[:, None, None]

    zeros = np.zeros(ncomp)
    return AsymptoticPair(zeros, zeros.copy(),
                          GridFunction(plus_grid, xi_plus),
                          _window_to_minus(geo, xi_minus_tilde))


def project_pi(a, pair: AsymptoticPair) -> AsymptoticPair:
    """Splicing projection pi_a on common-constant pairs.

    Equals total_unglue(a, (glue(a, pair), 0)); assembled here from the
    explicit coefficient form, which exposes the image structure: the new
    constant is A + av_a(r) and the remainders are cutoff mixtures of the
    old ones.  Identity at a = 0.
    """
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        return pair.copy()
    if not pair.is_E:
        raise ValueError("the splicing projection acts on common-constant pairs")
    geo = seam_geometry(gp, pair)
    av = seam_average(geo, pair)
    ncomp = pair.components
    rp = pair.r_plus.values
    rm_sh = _shifted_minus(geo, pair.r_minus.values)

    plus_grid = pair.r_plus.grid
    beta_p = cutoff_beta(plus_grid.s_nodes - 0.5 * geo.R)
    gamma_p = beta_p ** 2 + (1.0 - beta_p) ** 2
    # r^-(. - R) on [0, S]: only needed where beta (1 - beta) != 0.
    rm_on_plus = np.zeros((geo.m_S + 1, geo.n_t, ncomp))
    lo, hi = max(0, geo.m_R - geo.m_S), min(geo.m_S, geo.m_R)
    rm_on_plus[lo: hi + 1] = rm_sh[lo - geo.m_R + geo.m_S: hi - geo.m_R + geo.m_S + 1]
    eta_p = ((beta_p ** 2 / gamma_p)[:, None, None] * rp
             + (beta_p * (1.0 - beta_p) / gamma_p)[:, None, None] * rm_on_plus
             + (((1.0 - beta_p) * (1.0 - 2.0 * beta_p) / gamma_p)
                [:, None, None]) * av[None, None, :])

    minus_grid = pair.r_minus.grid
    # Window stations [R - S, R] carry the minus side before reindexing.
    win_s = (geo.R - geo.S) + geo.h_s * np.arange(geo.m_S + 1)
    beta_m = cutoff_beta(win_s - 0.5 * geo.R)
    gamma_m = beta_m ** 2 + (1.0 - beta_m) ** 2
    rp_on_win = np.zeros((geo.m_S + 1, geo.n_t, ncomp))
    k0 = max(0, geo.m_S - geo.m_R)
    k1 = min(geo.m_S, 2 * geo.m_S - geo.m_R)
    rp_on_win[k0: k1 + 1] = rp[geo.m_R - geo.m_S + k0: geo.m_R - geo.m_S + k1 + 1]
    eta_m_tilde = ((beta_m * (1.0 - beta_m) / gamma_m)[:, None, None] * rp_on_win
                   + ((1.0 - beta_m) ** 2 / gamma_m)[:, None, None]
                   * rm_sh[: geo.m_S + 1]
                   + ((beta_m * (2.0 * beta_m - 1.0) / gamma_m)
                      [:, None, None]) * av[None, None, :])
    eta_m = _fd.shift_t(eta_m_tilde, geo.theta)

    # eta's asymptotic part is av on both sides; subtract it so the stored
    # remainders decay while the constant absorbs A + av.
    c_out = pair.c_plus + av
    r_plus = GridFunction(plus_grid, eta_p - av[None, None, :])
    r_minus = GridFunction(minus_grid, eta_m - av[None, None, :])
    return AsymptoticPair(c_out, c_out.copy(), r_plus, r_minus)


def hat_project_pi(a, pair: AsymptoticPair) -> AsymptoticPair:
    """Hat splicing projection: the remainder mixture without averages."""
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        return pair.copy()
    geo = seam_geometry(gp, pair)
    ncomp = pair.components
    rp = pair.r_plus.values
    rm_sh = _shifted_minus(geo, pair.r_minus.values)

    plus_grid = pair.r_plus.grid
    beta_p = cutoff_beta(plus_grid.s_nodes - 0.5 * geo.R)
    gamma_p = beta_p ** 2 + (1.0 - beta_p) ** 2
    rm_on_plus = np.zeros((geo.m_S + 1, geo.n_t, ncomp))
    lo, hi = max(0, geo.m_R - geo.m_S), min(geo.m_S, geo.m_R)
    rm_on_plus[lo: hi + 1] = rm_sh[lo - geo.m_R + geo.m_S: hi - geo.m_R + geo.m_S + 1]
    xi_p = ((beta_p ** 2 / gamma_p)[:, None, None] * rp
            + (beta_p * (1.0 - beta_p) / gamma_p)[:, None, None] * rm_on_plus)

    win_s = (geo.R - geo.S) + geo.h_s * np.arange(geo.m_S + 1)
    beta_m = cutoff_beta(win_s - 0.5 * geo.R)
    gamma_m = beta_m ** 2 + (1.0 - beta_m) ** 2
    rp_on_win = np.zeros((geo.m_S + 1, geo.n_t, ncomp))
    k0 = max(0, geo.m_S - geo.m_R)
    k1 = min(geo.m_S, 2 * geo.m_S - geo.m_R)
    rp_on_win[k0: k1 + 1] = rp[geo.m_R - geo.m_S + k0: geo.m_R - geo.m_S + k1 + 1]
    xi_m_tilde = ((beta_m * (1.0 - beta_m) / gamma_m)[:, None, None] * rp_on_win
                  + ((1.0 - beta_m) ** 2 / gamma_m)[:, None, None]
                  * rm_sh[: geo.m_S + 1])
    xi_m = _fd.shift_t(xi_m_tilde, geo.theta)

    return AsymptoticPair(pair.c_plus.copy(), pair.c_minus.copy(),
                          GridFunction(plus_grid, xi_p),
                          GridFunction(pair.r_minus.grid, xi_m))


def retract_rho(a, pair: AsymptoticPair) -> AsymptoticPair:
    """Retraction rho_a onto the pairs that descend to the glued cylinder.

    Constants may differ: rho keeps them and splices only the remainders,
    adding the seam average to both constants.  Identity at a = 0;
    idempotent because the spliced remainders have vanishing seam average.
    """
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        return pair.copy()
    zero = np.zeros(pair.components)
    remainder_pair = AsymptoticPair(zero, zero.copy(),
                                    pair.r_plus.copy(), pair.r_minus.copy())
    spliced = project_pi(gp, remainder_pair)
    return AsymptoticPair(pair.c_plus + spliced.c_plus,
                          pair.c_minus + spliced.c_minus,
                          spliced.r_plus, spliced.r_minus)


def gamma_map(a, h: GridFunction, index: int, cutoff=None) -> GridFunction:
    """The four seam-localized transport maps between half-cylinders.

    index 1: multiply a plus field by the cutoff opened at the seam;
    index 2: transport a minus field to the plus side through the seam;
    index 3: the mirrored cutoff on a minus field;
    index 4: transport a plus field to the minus side.
    Maps 2 and 4 default to the raw bump factor, supported in the seam
    band only; their images decay like the seam is long.  At a = 0 the
    same-side maps are the identity and the transports vanish.
    """
    if index not in (1, 2, 3, 4):
        raise ValueError("index must be 1, 2, 3 or 4")
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    same_side = index in (1, 3)
    g = h.grid
    expect = ("half_plus", "half_minus", "half_minus", "half_plus")[index - 1]
    if g.domain_tag != expect:
        raise ValueError(f"map {index} takes a {expect} field")
    S = g.s_hi if expect == "half_plus" else -g.s_lo
    h_s, n_t = g.h_s, g.n_t

    if gp.broken:
        if same_side:
            return h.copy()
        grid = (CylinderGrid.half_plus(S, h_s, n_t) if index == 2
                else CylinderGrid.half_minus(S, h_s, n_t))
        return GridFunction.zeros(grid, h.components)
    if cutoff is None:
        cutoff = cutoff_beta if same_side else bump

    steps = gp.R / h_s
    m_R = int(round(steps))
    if abs(steps - m_R) * h_s > 1e-6 or m_R % 2 != 0:
        raise ValueError("seam must land on grid stations")
    R = m_R * h_s
    if R > 2.0 * S - 2.0 or R < 2.0:
        raise ValueError("seam length outside [2, 2S - 2]")
    m_S = int(round(S / h_s))

    if index == 1:
        fac = cutoff(g.s_nodes - 0.5 * R)
        return GridFunction(g, fac[:, None, None] * h.values)
    if index == 3:
        fac = cutoff(-g.s_nodes - 0.5 * R)
        return GridFunction(g, fac[:, None, None] * h.values)
    if index == 2:
        # Plus station i carries h(i h - R, t - theta); the factor vanishes
        # outside the seam band, which stays inside the minus window.
        out_grid = CylinderGrid.half_plus(S, h_s, n_t)
        fac = cutoff(out_grid.s_nodes - 0.5 * R)
        vals = np.zeros((m_S + 1, n_t, h.components))
        sh = _fd.shift_t(h.values, -gp.theta)
        lo, hi = max(0, m_R - m_S), min(m_S, m_R)
        vals[lo: hi + 1] = (fac[lo: hi + 1, None, None]
                            * sh[lo - m_R + m_S: hi - m_R + m_S + 1])
        return GridFunction(out_grid, vals)
    # Minus station k (s' = -S + k h) carries h(s' + R, t' + theta).
    out_grid = CylinderGrid.half_minus(S, h_s, n_t)
    fac = cutoff(-out_grid.s_nodes - 0.5 * R)
    vals = np.zeros((m_S + 1, n_t, h.components))
    sh = _fd.shift_t(h.values, gp.theta)
    lo, hi = max(0, m_S - m_R), min(m_S, 2 * m_S - m_R)
    vals[lo: hi + 1] = (fac[lo: hi + 1, None, None]
                        * sh[lo + m_R - m_S: hi + m_R - m_S + 1])
    return GridFunction(out_grid, vals)


def glued_norm(a, q: GridFunction, p: GridFunction, m: int,
               weights: WeightSequence | None = None) -> float:
    """Seam-adapted norm of a total-gluing image (q, p) at level m.

    |[q] - p_inf|^2 + e^{delta_m R} (|||q - [q] + p_inf|||_{3+m, -delta_m}^2
    + |||p - (1 - 2 beta_a) p_inf|||_{3+m, delta_m}^2): the field minus its
    constant is measured with decay toward the seam, the anti-glued part
    with growth, and the seam factor e^{delta_m R} matches the two weights
    so the total is uniformly equivalent to the norm of the unglued pair.
    """
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        raise ValueError("the seam-adapted norm needs an open seam (a != 0)")
    if weights is None:
        weights = WeightSequence.default("E")
    delta = weights[m]
    R = q.grid.R

    q_avg = average_at(q, 0.5 * R)
    p_inf = average_at(p, p.grid.s_hi)
    c = q_avg - p_inf

    q_c = GridFunction(q.grid, q.values - q_avg[None, None, :]
                       + p_inf[None, None, :])
    beta_w = cutoff_beta(p.grid.s_nodes - 0.5 * R)
    p_hat = GridFunction(p.grid, p.values - (1.0 - 2.0 * beta_w)[:, None, None]
                         * p_inf[None, None, :])
    interior = function_norm_sq(q_c, SobolevSpec(m, -delta, 3))
    window = function_norm_sq(p_hat, SobolevSpec(m, delta, 3))
    return float(np.sqrt(c @ c + np.exp(delta * R) * (interior + window)))


def hat_glued_norm(a, q_hat: GridFunction, p_hat: GridFunction, m: int,
                   weights: WeightSequence | None = None) -> float:
    """Seam-adapted norm on hat images (no constants, base order 2)."""
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        raise ValueError("the seam-adapted norm needs an open seam (a != 0)")
    if weights is None:
        weights = WeightSequence.default("E")
    delta = weights[m]
    R = q_hat.grid.R
    interior = function_norm_sq(q_hat, SobolevSpec(m, -delta, 2))
    window = function_norm_sq(p_hat, SobolevSpec(m, delta, 2))
    return float(np.sqrt(np.exp(delta * R) * (interior + window)))
