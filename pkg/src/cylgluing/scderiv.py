"""Scale-calculus differentiability checks.

A map between scales of Banach spaces is differentiable in the scale sense
when the first-order Taylor remainder, measured one level *below* the point
and direction, vanishes faster than the step:

    q(eps) = |f(x + eps h) - f(x) - eps Df(x) h|_m / (eps |h|_{m+1}) -> 0.

The level shift m+1 -> m is the content: the same quotient measured on a
single fixed level does not converge for the translation action, and the
negative control below exhibits exactly that.

`ScMapUnderTest` packages a map as closures so the checker never needs to
know the shape of points, directions, or outputs.  `sc_derivative_check`
runs a dyadic step ladder, fits a log-log slope over a stated window, and
reports the quotients.  Harness constructors at the bottom build the maps
exercised by the test suite: cylinder translation, reparametrization, the
splicing retraction along a real gluing-parameter path, and the rank-one
projection family with exponentially sliding center.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import _fd
from .fnspace import (
    AsymptoticPair,
    CylinderGrid,
    GridFunction,
    SobolevSpec,
    WeightSequence,
    average_at,
    derivative,
    shift,
    reparametrize,
    weighted_norm,
)
from .glue import (
    bump,
    cutoff_beta,
    cutoff_beta_prime,
    seam_average,
    seam_geometry,
)
from .profile import dR_dmodulus, glue_params

__all__ = [
    "ScMapUnderTest",
    "sc_derivative_check",
    "richardson_fd_tangent",
    "shift_harness",
    "rough_line_point",
    "reparametrize_harness",
    "rho_continuous",
    "retraction_harness",
    "funny_projection",
    "funny_decay_report",
]


@dataclass(frozen=True)
class ScMapUnderTest:
    """A map packaged for difference-quotient testing.

    eval(x)            -> y               value at a point
    tangent(x, h)      -> y-space element candidate derivative applied to h
    move(x, eps, h)    -> x + eps h       step in the point space
    out_norm(y, m)     -> float           output-space norm on level m
    in_norm(h, m)      -> float           direction norm on level m

    Outputs must support `a - b` and `eps * y` so the checker can form the
    Taylor remainder without knowing their type.
    """

    eval: Callable[[Any], Any]
    tangent: Callable[[Any, Any], Any]
    move: Callable[[Any, float, Any], Any]
    out_norm: Callable[[Any, int], float]
    in_norm: Callable[[Any, int], float]


def sc_derivative_check(
    map_under_test: ScMapUnderTest,
    point: Any,
    direction: Any,
    m: int,
    in_level: Optional[int] = None,
    eps_ladder: Optional[Sequence[float]] = None,
    fit_window: tuple[float, float] = (2.0 ** -12, 2.0 ** -3),
) -> dict:
    """Difference-quotient report for one point and direction.

    Evaluates q(eps) over a dyadic ladder (default 2^-3 .. 2^-16) and fits
    the slope of log q against log eps over `fit_window` by least squares.
    `in_level` defaults to m + 1, the scale shift; passing m instead probes
    the fixed-level quotient (the negative control).  When every quotient
    is below 1e-10 the map is linear to rounding and the slope is reported
    as 1.0 with `converged_exactly` set.
    """
    if in_level is None:
        in_level = m + 1
    if eps_ladder is None:
        eps_ladder = [2.0 ** -k for k in range(3, 17)]
    eps_arr = np.asarray(sorted(eps_ladder, reverse=True), dtype=float)

    y0 = map_under_test.eval(point)
    t = map_under_test.tangent(point, direction)
    hnorm = map_under_test.in_norm(direction, in_level)
    if hnorm <= 0.0:
        raise ValueError("direction has zero norm on the input level")

    q = np.empty_like(eps_arr)
    for i, eps in enumerate(eps_arr):
        y_eps = map_under_test.eval(map_under_test.move(point, eps, direction))
        rem = y_eps - y0 - eps * t
        q[i] = map_under_test.out_norm(rem, m) / (eps * hnorm)

    if np.max(q) < 1e-10:
        return {
            "eps": eps_arr,
            "q": q,
            "slope": 1.0,
            "converged_exactly": True,
        }

    lo, hi = fit_window
    mask = (eps_arr >= lo) & (eps_arr <= hi) & (q > 0.0)
    if np.count_nonzero(mask) < 2:
        raise ValueError("fit window contains fewer than two usable quotients")
    slope = np.polyfit(np.log2(eps_arr[mask]), np.log2(q[mask]), 1)[0]
    return {
        "eps": eps_arr,
        "q": q,
        "slope": float(slope),
        "converged_exactly": False,
    }


def richardson_fd_tangent(
    map_under_test: ScMapUnderTest, point: Any, direction: Any, eps: float = 1e-3
) -> Any:
    """Fourth-order centered difference candidate for Df(x)h.

    For maps whose derivative has no closed form (the glued-parameter
    family) this supplies the tangent fed back into the quotient check.
    """
    f = map_under_test.eval
    mv = map_under_test.move
    y1 = f(mv(point, eps, direction)) - f(mv(point, -eps, direction))
    y2 = f(mv(point, 2 * eps, direction)) - f(mv(point, -2 * eps, direction))
    return (8.0 * y1 - y2) * (1.0 / (12.0 * eps))


# ---------------------------------------------------------------------------
# translation harness


def shift_harness(
    out_grid: CylinderGrid,
    weights: Optional[WeightSequence] = None,
    base_order: int = 0,
) -> ScMapUnderTest:
    """Translation (R, theta, u) -> u(. + R, . + theta) onto a fixed grid.

    Points are tuples (R, theta, u) with u on a bi-infinite cylinder wide
    enough that every probed translate of `out_grid` stays inside its
    domain.  The candidate tangent is the transport of the infinitesimal
    motion, R1 u_s + theta1 u_t + v, by the same translation.
    """
    if weights is None:
        weights = WeightSequence.default("L")

    def _eval(x):
        big_r, theta, u = x
        return shift(u, big_r, theta, out_grid=out_grid)

    def _tangent(x, h):
        big_r, theta, u = x
        r1, th1, v = h
        motion = v.copy()
        if r1 != 0.0:
            motion = motion + r1 * derivative(u, (1, 0))
        if th1 != 0.0:
            motion = motion + th1 * derivative(u, (0, 1))
        return shift(motion, big_r, theta, out_grid=out_grid)

    def _move(x, eps, h):
        big_r, theta, u = x
        r1, th1, v = h
        return (big_r + eps * r1, theta + eps * th1, u + eps * v)

    def _out_norm(y, m):
        return weighted_norm(y, SobolevSpec(m, weights[m], base_order))

    def _in_norm(h, m):
        r1, th1, v = h
        return abs(r1) + abs(th1) + weighted_norm(
            v, SobolevSpec(m, weights[m], base_order)
        )

    return ScMapUnderTest(_eval, _tangent, _move, _out_norm, _in_norm)


def rough_line_point(
    grid: CylinderGrid, p: float, seed: int = 0, components: int = 1
) -> GridFunction:
    """Random function on a line grid with power-law spectrum |coef_k| ~ k^-p.

    p slightly above 3/2 lands just inside H^1: first-order Taylor of its
    translates converges like eps^(p - 3/2), the plateau the fixed-level
    quotient is meant to expose.  Built by inverse FFT over the grid's own
    frequency ladder, so every representable mode carries content.
    """
    if grid.n_t != 1:
        raise ValueError("rough points are built on line grids (n_t == 1)")
    n = grid.n_s - 1  # periodic length; last node duplicates the first
    rng = np.random.default_rng(seed)
    vals = np.zeros((grid.n_s, 1, components))
    for c in range(components):
        coef = np.zeros(n // 2 + 1, dtype=complex)
        k = np.arange(1, n // 2 + 1, dtype=float)
        phases = rng.uniform(0.0, 2.0 * np.pi, n // 2)
        coef[1:] = (k ** -p) * np.exp(1j * phases)
        samples = np.fft.irfft(coef, n) * n
        vals[:-1, 0, c] = samples
        vals[-1, 0, c] = samples[0]
    vals /= np.sqrt(np.mean(vals**2))
    return GridFunction(grid, vals)


# ---------------------------------------------------------------------------
# reparametrization harness


def reparametrize_harness(
    target: CylinderGrid,
    weights: Optional[WeightSequence] = None,
    base_order: int = 0,
) -> ScMapUnderTest:
    """Composition with a perturbed translation, (c, d, r, u) -> u o phi.

    phi(s, t) = (s + c + r_1(s, t), t + d + r_2(s, t)) with r a two
    component field on the target grid.  The tangent is the chain rule:

        (du) o phi + (u_s o phi)(dc + dr_1) + (u_t o phi)(dd + dr_2).
    """
    if weights is None:
        weights = WeightSequence.default("L")

    def _eval(x):
        c, d, r, u = x
        return reparametrize(u, c, d, r)

    def _tangent(x, h):
        c, d, r, u = x
        dc, dd, dr, du = h
        out = reparametrize(du, c, d, r)
        us = reparametrize(derivative(u, (1, 0)), c, d, r)
        ut = reparametrize(derivative(u, (0, 1)), c, d, r)
        f1 = dc + dr.values[:, :, 0]
        f2 = dd + dr.values[:, :, 1]
        vals = out.values + us.values * f1[:, :, None] + ut.values * f2[:, :, None]
        return GridFunction(target, vals)

    def _move(x, eps, h):
        c, d, r, u = x
        dc, dd, dr, du = h
        return (c + eps * dc, d + eps * dd, r + eps * dr, u + eps * du)

    def _out_norm(y, m):
        return weighted_norm(y, SobolevSpec(m, weights[m], base_order))

    def _in_norm(h, m):
        dc, dd, dr, du = h
        spec = SobolevSpec(m, weights[m], base_order)
        return abs(dc) + abs(dd) + weighted_norm(dr, spec) + weighted_norm(du, spec)

    return ScMapUnderTest(_eval, _tangent, _move, _out_norm, _in_norm)


# ---------------------------------------------------------------------------
# splicing-retraction harness along a real gluing-parameter path


def rho_continuous(a, pair: AsymptoticPair) -> AsymptoticPair:
    """The splicing retraction evaluated at an arbitrary seam length.

    The grid operator `retract_rho` locks the seam to a grid station so
    its index arithmetic stays exact.  Differentiating in the gluing
    parameter needs the family between stations: this evaluation uses the
    same mixing coefficients with the transported remainders interpolated
    in s (the mixing weight b(1 - b) is supported in the unit seam band,
    where the transported argument stays inside the opposite domain).  At
    a grid-aligned seam it reproduces `retract_rho` to rounding.
    """
    gp = a if hasattr(a, "R") else glue_params(a)
    if gp.broken:
        return pair.copy()
    if gp.theta != 0.0:
        raise ValueError("the continuous family is probed along real a only")
    R = gp.R
    grid_p = pair.r_plus.grid
    grid_m = pair.r_minus.grid
    big_s, h = grid_p.s_hi, grid_p.h_s
    if not (2.0 <= R <= 2.0 * big_s - 2.0):
        raise ValueError(f"seam length R = {R} outside [2, 2S - 2]")

    s_p = grid_p.s_nodes
    s_m = grid_m.s_nodes
    b = cutoff_beta(s_p - R / 2.0)
    bt = cutoff_beta(s_m + R / 2.0)
    g = 2.0 * b * b - 2.0 * b + 1.0
    gt = 2.0 * bt * bt - 2.0 * bt + 1.0

    rp = pair.r_plus.values
    rm = pair.r_minus.values
    rm_on_p = np.zeros_like(rp)
    sel = np.nonzero((b > 0.0) & (b < 1.0))[0]
    if sel.size:
        rm_on_p[sel] = _fd.interpolate_s(rm, -big_s, h, s_p[sel] - R)
    rp_on_m = np.zeros_like(rm)
    selm = np.nonzero((bt > 0.0) & (bt < 1.0))[0]
    if selm.size:
        rp_on_m[selm] = _fd.interpolate_s(rp, 0.0, h, s_m[selm] + R)

    av = 0.5 * (average_at(pair.r_plus, R / 2.0) + average_at(pair.r_minus, -R / 2.0))
    b3 = b[:, None, None]
    g3 = g[:, None, None]
    bt3 = bt[:, None, None]
    gt3 = gt[:, None, None]
    out_p = (b3 * b3 / g3) * rp + (b3 * (1.0 - b3) / g3) * rm_on_p - (b3 / g3) * av
    out_m = (bt3 * (1.0 - bt3) / gt3) * rp_on_m
    out_m = out_m + ((1.0 - bt3) ** 2 / gt3) * rm - ((1.0 - bt3) / gt3) * av
    return AsymptoticPair(
        pair.c_plus + av,
        pair.c_minus + av,
        GridFunction(grid_p, out_p),
        GridFunction(grid_m, out_m),
    )


def _plus_shifted(geo, minus_values: np.ndarray) -> np.ndarray:
    # r^-(s - R, .) sampled on the plus grid, zero outside the overlap.
    out = np.zeros((geo.m_S + 1,) + minus_values.shape[1:])
    lo = max(0, geo.m_R - geo.m_S)
    hi = min(geo.m_S, geo.m_R)
    out[lo : hi + 1] = minus_values[lo - geo.m_R + geo.m_S : hi - geo.m_R + geo.m_S + 1]
    return out


def _minus_shifted(geo, plus_values: np.ndarray) -> np.ndarray:
    # r^+(s' + R, .) sampled on the minus grid, zero outside the overlap.
    out = np.zeros((geo.m_S + 1,) + plus_values.shape[1:])
    lo = max(0, geo.m_S - geo.m_R)
    hi = min(geo.m_S, 2 * geo.m_S - geo.m_R)
    out[lo : hi + 1] = plus_values[lo + geo.m_R - geo.m_S : hi + geo.m_R - geo.m_S + 1]
    return out


def retraction_harness(
    sample_pair: AsymptoticPair,
    weights: Optional[WeightSequence] = None,
) -> ScMapUnderTest:
    """The splicing retraction (a, h) -> rho_a(h) along real a > 0.

    Points are (a, pair) with a real and positive, so the circle shift is
    frozen at zero and the only geometric motion is the seam position
    R = phi(a).  Evaluation goes through `rho_continuous`; the base point
    should sit at a grid-aligned seam so the candidate tangent can use the
    exact grid transports.  The tangent collects four effects: the linear
    action on the pair direction, the cutoff sliding with R, the transport
    terms r_s dR, and the motion of the seam average.  Their bookkeeping
    is the point of the exercise; the quotient check validates it.
    """
    if weights is None:
        weights = WeightSequence.default("E")
    grid_p = sample_pair.r_plus.grid
    big_s = grid_p.s_hi

    def _eval(x):
        a, pair = x
        return rho_continuous(a, pair)

    def _move(x, eps, h):
        a, pair = x
        da, dpair = h
        return (a + eps * da, pair + eps * dpair)

    def _tangent(x, h):
        a, pair = x
        da, dpair = h
        geo = seam_geometry(a, pair)
        dR = dR_dmodulus(float(a)) * da

        s_p = pair.r_plus.grid.s_nodes
        s_m = pair.r_minus.grid.s_nodes
        b = cutoff_beta(s_p - geo.R / 2.0)[:, None, None]
        bp = cutoff_beta_prime(s_p - geo.R / 2.0)[:, None, None]
        bt = cutoff_beta(s_m + geo.R / 2.0)[:, None, None]
        bpt = cutoff_beta_prime(s_m + geo.R / 2.0)[:, None, None]
        g = 2.0 * b * b - 2.0 * b + 1.0
        gt = 2.0 * bt * bt - 2.0 * bt + 1.0

        rp = pair.r_plus.values
        rm = pair.r_minus.values
        rm_on_p = _plus_shifted(geo, rm)
        rp_on_m = _minus_shifted(geo, rp)
        rm_s_on_p = _plus_shifted(geo, derivative(pair.r_minus, (1, 0)).values)
        rp_s_on_m = _minus_shifted(geo, derivative(pair.r_plus, (1, 0)).values)

        av = seam_average(geo, pair)
        av_lin = seam_average(geo, dpair)
        # seam average slides with R/2 on both half cylinders
        i_half = geo.m_R // 2
        dq_p = derivative(pair.r_plus, (1, 0)).values[i_half].mean(axis=0)
        dq_m = derivative(pair.r_minus, (1, 0)).values[geo.m_S - i_half].mean(axis=0)
        av_R = 0.25 * (dq_p - dq_m)

        # linear action on the pair direction
        dlp = dpair.r_plus.values
        dlm = dpair.r_minus.values
        tp = (b * b / g) * dlp + (b * (1.0 - b) / g) * _plus_shifted(geo, dlm)
        tp = tp - (b / g) * av_lin
        tm = (bt * (1.0 - bt) / gt) * _minus_shifted(geo, dlp)
        tm = tm + ((1.0 - bt) ** 2 / gt) * dlm - ((1.0 - bt) / gt) * av_lin

        # cutoff slides: d beta / da on each side, with opposite signs
        db = -0.5 * bp * dR
        dbt = 0.5 * bpt * dR
        tp = tp + db * (
            (2.0 * b * (1.0 - b) / g**2) * rp
            + ((1.0 - 2.0 * b) / g**2) * rm_on_p
            - ((1.0 - 2.0 * b * b) / g**2) * av
        )
        tm = tm + dbt * (
            ((1.0 - 2.0 * bt) / gt**2) * rp_on_m
            - (2.0 * bt * (1.0 - bt) / gt**2) * rm
            + ((-2.0 * bt * bt + 4.0 * bt - 1.0) / gt**2) * av
        )

        # transported arguments move with R, and so does the seam average
        tp = tp + (b * (1.0 - b) / g) * (-dR * rm_s_on_p) - (b / g) * (av_R * dR)
        tm = tm + (bt * (1.0 - bt) / gt) * (dR * rp_s_on_m) - (
            (1.0 - bt) / gt
        ) * (av_R * dR)

        dc = av_lin + av_R * dR
        return AsymptoticPair(
            dpair.c_plus + dc,
            dpair.c_minus + dc,
            GridFunction(pair.r_plus.grid, tp),
            GridFunction(pair.r_minus.grid, tm),
        )

    def _out_norm(y, m):
        return weighted_norm(y, SobolevSpec(m, weights[m], 3))

    def _in_norm(h, m):
        da, dpair = h
        return abs(da) + weighted_norm(dpair, SobolevSpec(m, weights[m], 3))

    return ScMapUnderTest(_eval, _tangent, _move, _out_norm, _in_norm)


# ---------------------------------------------------------------------------
# rank-one projection family with exponentially sliding center


def _unit_bump_at(grid: CylinderGrid, center: float) -> np.ndarray:
    vals = bump(grid.s_nodes - center)
    quad = _fd.gregory_weights(grid.n_s, grid.h_s)
    nrm = np.sqrt(np.sum(quad * vals * vals))
    return vals / nrm


def funny_projection(t: float, f: GridFunction) -> GridFunction:
    """Rank-one projection onto a bump sliding to -exp(1/t) as t -> 0+.

    For t <= 0 the projection is zero, and for t > 0 it is the orthogonal
    projection onto the normalized bump centered at -exp(1/t).  The family
    is continuous at t = 0 only because each level's norm weight grows
    slower than the next one's: this is the standard example of a map that
    is scale-smooth yet nowhere classically differentiable in t.
    """
    grid = f.grid
    if grid.n_t != 1:
        raise ValueError("the projection family lives on line grids (n_t == 1)")
    if t <= 0.0:
        return GridFunction.zeros(grid, f.components)
    center = -np.exp(1.0 / t)
    if center - 1.0 < grid.s_lo:
        raise ValueError(
            "bump support leaves the grid; need exp(1/t) <= |s_lo| - 1"
        )
    e = _unit_bump_at(grid, center)[:, None]
    quad = _fd.gregory_weights(grid.n_s, grid.h_s)[:, None]
    out = np.empty_like(f.values)
    for c in range(f.components):
        coef = np.sum(quad * e * f.values[:, :, c])
        out[:, :, c] = coef * e
    return GridFunction(grid, out)


def funny_decay_report(
    f: GridFunction,
    m: int,
    weights: Optional[WeightSequence] = None,
    centers: Optional[Sequence[float]] = None,
) -> dict:
    """Decay ratios |pi_t f|_m * exp((d_{m+1} - d_m) e^{1/t}) / |f|_{m+1}.

    The projection sees f only near -exp(1/t), where a level-(m+1) function
    is exponentially small in the gap between consecutive weights; measured
    on level m the projection inherits exactly that gap.  Bounded ratios
    across the t ladder are the quantitative form of the continuity claim.
    """
    grid = f.grid
    if weights is None:
        weights = WeightSequence.default("L")
    if centers is None:
        top = abs(grid.s_lo) - 2.0
        centers = [4.0 * 2.0**j for j in range(64) if 4.0 * 2.0**j <= top]
        if not centers:
            raise ValueError("grid too narrow for any admissible center")
    gap = weights[m + 1] - weights[m]
    denom = weighted_norm(f, SobolevSpec(m + 1, weights[m + 1], 0))
    t_vals, ratios = [], []
    for x in centers:
        t = 1.0 / np.log(x)
        pf = funny_projection(t, f)
        num = weighted_norm(pf, SobolevSpec(m, weights[m], 0))
        t_vals.append(t)
        ratios.append(num * np.exp(gap * x) / denom)
    ratios_arr = np.asarray(ratios)
    return {
        "t": np.asarray(t_vals),
        "ratio": ratios_arr,
        "max_ratio": float(ratios_arr.max()),
    }
