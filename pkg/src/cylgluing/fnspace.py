"""Weighted function spaces on half-infinite and glued cylinders.

Fields live on uniform grids over [s_lo, s_hi] x S^1 with S^1 = [0, 1).
Derivatives are order-8 finite differences in s and spectral in t; norms are
exponentially weighted Sobolev norms

    |u|_{k, delta}^2 = sum_{|alpha| <= k} int |D^alpha u|^2 e^{2 delta |s - s_c|}

with the weight center s_c determined by the domain: the seam midpoint for
glued windows, the boundary circle s = 0 for half-cylinders.  A scale of
such norms over an increasing weight sequence realizes one nested family of
spaces on a single discretization.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _fd

DOMAIN_TAGS = ("half_plus", "half_minus", "finite", "infinite_glued", "biinfinite")

DELTA_SUP = 2.0 * np.pi


@dataclass(frozen=True)
class WeightSequence:
    """Strictly increasing exponential weights delta_0 < delta_1 < ... < 2 pi.

    mode "E" takes delta_0 > 0 (every level decays); mode "L" anchors the
    scale at delta_0 = 0, the unweighted base level.
    """

    deltas: tuple
    mode: str = "E"

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        d = np.array(self.deltas)
        if self.mode not in ("L", "E"):
            raise ValueError("mode must be 'L' or 'E'")
        if d.size == 0 or np.any(d < 0.0):
            raise ValueError("weights must be nonnegative")
        if np.any(np.diff(d) <= 0.0):
            raise ValueError("weights must be strictly increasing")
        if d[-1] >= DELTA_SUP:
            raise ValueError("weights must stay strictly below 2 pi")
        if self.mode == "E" and d[0] <= 0.0:
            raise ValueError("mode 'E' needs delta_0 > 0")
        if self.mode == "L" and d[0] != 0.0:
            raise ValueError("mode 'L' needs delta_0 = 0")

    @classmethod
    def default(cls, mode: str = "E", levels: int = 12) -> "WeightSequence":
        """delta_m = min(0.5 + 0.25 m, 6.0), with delta_0 = 0 in mode 'L'."""
        deltas = [min(0.5 + 0.25 * m, 6.0) for m in range(levels)]
        # The cap would stall the sequence; keep it strictly increasing.
        for i in range(1, levels):
            if deltas[i] <= deltas[i - 1]:
                deltas[i] = deltas[i - 1] + 1e-3
        if mode == "L":
            deltas[0] = 0.0
        return cls(tuple(deltas), mode)

    def __getitem__(self, m: int) -> float:
        return self.deltas[m]

    def __len__(self) -> int:
        return len(self.deltas)


@dataclass(frozen=True)
class SobolevSpec:
    """Level m norm specification: k = base_order + m derivatives, weight delta.

    base_order 3 is the scale of function pairs, 2 the scale of their
    Cauchy-Riemann images, 0 a plain weighted L^2.  delta may be negative
    for interior seminorms on glued windows.
    """

    m: int
    delta: float
    base_order: int = 3

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("level m must be >= 0")
        if self.base_order not in (0, 2, 3):
            raise ValueError("base_order must be 0, 2 or 3")
        if self.k > 6:
            raise ValueError("derivative count base_order + m must stay <= 6")

    @property
    def k(self) -> int:
        return self.base_order + self.m


@dataclass(frozen=True)
class CylinderGrid:
    """Uniform grid on [s_lo, s_hi] x S^1 with n_t equispaced angles.

    n_t is a power of two (n_t = 1 degenerates the cylinder to a line).
    domain_tag records the geometry: half_plus [0, S], half_minus [-S, 0],
    finite [0, R] (a glued cylinder), infinite_glued [R - S, S] (the window
    of an anti-glued pair), or biinfinite.
    """

    n_t: int
    h_s: float
    s_lo: float
    s_hi: float
    domain_tag: str

    def __post_init__(self):
        if self.n_t < 1 or (self.n_t & (self.n_t - 1)) != 0:
            raise ValueError("n_t must be a power of two")
        if self.domain_tag not in DOMAIN_TAGS:
            raise ValueError(f"unknown domain tag {self.domain_tag!r}")
        if self.h_s <= 0.0 or self.s_hi <= self.s_lo:
            raise ValueError("need h_s > 0 and s_hi > s_lo")
        span = (self.s_hi - self.s_lo) / self.h_s
        if abs(span - round(span)) > 1e-9:
            raise ValueError("window length must be a multiple of h_s")
        if self.domain_tag in ("half_plus", "finite") and self.s_lo != 0.0:
            raise ValueError(f"{self.domain_tag} grid starts at s = 0")
        if self.domain_tag == "half_minus" and self.s_hi != 0.0:
            raise ValueError("half_minus grid ends at s = 0")

    @property
    def n_s(self) -> int:
        return int(round((self.s_hi - self.s_lo) / self.h_s)) + 1

    @cached_property
    def s_nodes(self) -> np.ndarray:
        return self.s_lo + self.h_s * np.arange(self.n_s)

    @cached_property
    def t_nodes(self) -> np.ndarray:
        return np.arange(self.n_t) / self.n_t

    @property
    def weight_center(self) -> float:
        if self.domain_tag in ("finite", "infinite_glued"):
            return 0.5 * (self.s_lo + self.s_hi)
        return 0.0

    @property
    def R(self) -> float:
        """Seam length encoded by the window, where the tag defines one."""
        if self.domain_tag == "finite":
            return self.s_hi
        if self.domain_tag == "infinite_glued":
            return self.s_lo + self.s_hi
        raise ValueError(f"domain {self.domain_tag!r} carries no seam length")

    def station(self, s: float) -> int:
        """Index of the grid station at coordinate s; must be on the grid."""
        pos = (s - self.s_lo) / self.h_s
        i = int(round(pos))
        if abs(pos - i) > 1e-9 or i < 0 or i >= self.n_s:
            raise ValueError(f"s = {s} is not a station of this grid")
        return i

    # Factories for the standard windows.
    @classmethod
    def half_plus(cls, S: float, h_s: float, n_t: int) -> "CylinderGrid":
        return cls(n_t, h_s, 0.0, S, "half_plus")

    @classmethod
    def half_minus(cls, S: float, h_s: float, n_t: int) -> "CylinderGrid":
        return cls(n_t, h_s, -S, 0.0, "half_minus")

    @classmethod
    def finite(cls, R: float, h_s: float, n_t: int) -> "CylinderGrid":
        return cls(n_t, h_s, 0.0, R, "finite")

    @classmethod
    def glued_window(cls, R: float, S: float, h_s: float, n_t: int) -> "CylinderGrid":
        return cls(n_t, h_s, R - S, S, "infinite_glued")

    @classmethod
    def biinfinite(cls, S: float, h_s: float, n_t: int) -> "CylinderGrid":
        return cls(n_t, h_s, -S, S, "biinfinite")

    @classmethod
    def line(cls, S: float, h_s: float) -> "CylinderGrid":
        return cls(1, h_s, -S, S, "biinfinite")


class GridFunction:
    """Sampled field on a CylinderGrid with 1 or 2 real components."""

    def __init__(self, grid: CylinderGrid, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.ndim == 2:
            values = values[:, :, None]
        if values.shape[:2] != (grid.n_s, grid.n_t):
            raise ValueError("values shape does not match the grid")
        if values.shape[2] not in (1, 2):
            raise ValueError("component dimension must be 1 or 2")
        self.grid = grid
        self.values = values

    @property
    def components(self) -> int:
        return self.values.shape[2]

    @classmethod
    def zeros(cls, grid: CylinderGrid, components: int = 1) -> "GridFunction":
        return cls(grid, np.zeros((grid.n_s, grid.n_t, components)))

    @classmethod
    def from_callable(cls, grid: CylinderGrid, fn, components: int = 1) -> "GridFunction":
        s = grid.s_nodes[:, None]
        t = grid.t_nodes[None, :]
        out = fn(s, t)
        if components == 1:
            values = np.broadcast_to(np.asarray(out, dtype=float),
                                     (grid.n_s, grid.n_t))[:, :, None]
        else:
            values = np.stack([np.broadcast_to(np.asarray(c, dtype=float),
                                               (grid.n_s, grid.n_t)) for c in out],
                              axis=2)
        return cls(grid, np.array(values))

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())

    def _check_mate(self, other: "GridFunction"):
        if self.grid != other.grid or self.components != other.components:
            raise ValueError("grid functions live on different grids")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check_mate(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check_mate(other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "GridFunction":
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)

    def shift_constant(self, c) -> "GridFunction":
        """Add a constant vector c to every sample."""
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return GridFunction(self.grid, self.values + c[None, None, :])


def derivative(u: GridFunction, alpha) -> GridFunction:
    """Mixed derivative D^alpha u for alpha = (p_s, p_t), |alpha| <= 6."""
    p_s, p_t = int(alpha[0]), int(alpha[1])
    if p_s < 0 or p_t < 0 or p_s + p_t > 6:
        raise ValueError("derivative order |alpha| must be between 0 and 6")
    out = u.values
    if p_s > 0:
        out = _fd.apply_s_derivative(out, u.grid.h_s, p_s)
    if p_t > 0:
        out = _fd.apply_t_derivative(out, p_t)
    if p_s == 0 and p_t == 0:
        out = out.copy()
    return GridFunction(u.grid, out)


def _sq_fields(u: GridFunction, kmax: int) -> dict:
    """Squared pointwise magnitudes of all D^alpha u with |alpha| <= kmax."""
    fields = {}
    s_stack = u.values
    for i in range(kmax + 1):
        if i > 0:
            s_stack = _fd.apply_s_derivative(u.values, u.grid.h_s, i)
        t_stack = s_stack
        for j in range(kmax + 1 - i):
            if j > 0:
                t_stack = _fd.apply_t_derivative(s_stack, j)
            fields[(i, j)] = np.sum(t_stack ** 2, axis=2)
    return fields


def _quad_weight(grid: CylinderGrid, delta: float) -> np.ndarray:
    """Quadrature times exponential weight, as an (n_s,) array.

    The weight e^{2 delta |s - s_c|} has a kink at the center; when the
    center is an interior node the end-corrected quadrature is applied on
    each side separately so the composite rule stays O(h^8).
    """
    c = grid.weight_center
    pos = (c - grid.s_lo) / grid.h_s
    i = int(round(pos))
    if abs(pos - i) < 1e-9 and 0 < i < grid.n_s - 1:
        w = np.zeros(grid.n_s)
        w[: i + 1] = _fd.gregory_weights(i + 1, grid.h_s)
        w[i:] += _fd.gregory_weights(grid.n_s - i, grid.h_s)
    else:
        w = _fd.gregory_weights(grid.n_s, grid.h_s)
    return (w / grid.n_t) * np.exp(2.0 * delta * np.abs(grid.s_nodes - c))


def _norm_sq_from_fields(fields: dict, grid: CylinderGrid, spec: SobolevSpec) -> float:
    w = _quad_weight(grid, spec.delta)
    total = 0.0
    for (i, j), sq in fields.items():
        if i + j <= spec.k:
            total += float(w @ sq.sum(axis=1))
    return total


def function_norm_sq(u: GridFunction, spec: SobolevSpec) -> float:
    """Squared weighted Sobolev norm of a single grid function."""
    return _norm_sq_from_fields(_sq_fields(u, spec.k), u.grid, spec)


@dataclass
class AsymptoticPair:
    """Pair of half-cylinder fields u^{\\pm} = c^{\\pm} + r^{\\pm}.

    r_plus lives on a half_plus grid, r_minus on the mirrored half_minus
    grid, both decaying toward their infinite ends; c^{\\pm} are the
    asymptotic constants.  Pairs with c^+ = c^- form the common-constant
    subspace on which plain gluing is an isomorphism.
    """

    c_plus: np.ndarray
    c_minus: np.ndarray
    r_plus: GridFunction
    r_minus: GridFunction

    def __post_init__(self):
        self.c_plus = np.atleast_1d(np.asarray(self.c_plus, dtype=float))
        self.c_minus = np.atleast_1d(np.asarray(self.c_minus, dtype=float))
        if self.r_plus.grid.domain_tag != "half_plus":
            raise ValueError("r_plus must live on a half_plus grid")
        if self.r_minus.grid.domain_tag != "half_minus":
            raise ValueError("r_minus must live on a half_minus grid")
        gp, gm = self.r_plus.grid, self.r_minus.grid
        if (gp.n_t, gp.h_s, gp.s_hi) != (gm.n_t, gm.h_s, -gm.s_lo):
            raise ValueError("half grids must mirror each other")
        n = self.r_plus.components
        if self.r_minus.components != n or self.c_plus.size != n or self.c_minus.size != n:
            raise ValueError("component dimensions disagree")

    @property
    def components(self) -> int:
        return self.r_plus.components

    @property
    def is_E(self) -> bool:
        """True when the asymptotic constants agree exactly."""
        return bool(np.array_equal(self.c_plus, self.c_minus))

    @classmethod
    def zeros(cls, S: float, h_s: float, n_t: int, components: int = 1) -> "AsymptoticPair":
        gp = CylinderGrid.half_plus(S, h_s, n_t)
        gm = CylinderGrid.half_minus(S, h_s, n_t)
        z = np.zeros(components)
        return cls(z, z.copy(), GridFunction.zeros(gp, components),
                   GridFunction.zeros(gm, components))

    def copy(self) -> "AsymptoticPair":
        return AsymptoticPair(self.c_plus.copy(), self.c_minus.copy(),
                              self.r_plus.copy(), self.r_minus.copy())

    def __add__(self, other: "AsymptoticPair") -> "AsymptoticPair":
        return AsymptoticPair(self.c_plus + other.c_plus,
                              self.c_minus + other.c_minus,
                              self.r_plus + other.r_plus,
                              self.r_minus + other.r_minus)

    def __sub__(self, other: "AsymptoticPair") -> "AsymptoticPair":
        return AsymptoticPair(self.c_plus - other.c_plus,
                              self.c_minus - other.c_minus,
                              self.r_plus - other.r_plus,
                              self.r_minus - other.r_minus)

    def __mul__(self, scalar: float) -> "AsymptoticPair":
        s = float(scalar)
        return AsymptoticPair(self.c_plus * s, self.c_minus * s,
                              self.r_plus * s, self.r_minus * s)

    __rmul__ = __mul__

    def plus_values(self) -> np.ndarray:
        """Samples of the full field c^+ + r^+ on the half_plus grid."""
        return self.r_plus.values + self.c_plus[None, None, :]

    def minus_values(self) -> np.ndarray:
        return self.r_minus.values + self.c_minus[None, None, :]

    def tail_sup(self, delta: float) -> float:
        """sup of |r^{\\pm}| e^{delta |s|} over the two far boundary circles."""
        S = self.r_plus.grid.s_hi
        tp = np.max(np.abs(self.r_plus.values[-1])) * np.exp(delta * S)
        tm = np.max(np.abs(self.r_minus.values[0])) * np.exp(delta * S)
        return float(max(tp, tm))

    def boundary_violation(self) -> float:
        """Deviation from the boundary normalization h(0, t) in {0} x R,
        h(0, 0) = (0, 0), for pairs of 2-component fields."""
        if self.components != 2:
            raise ValueError("boundary normalization applies to 2-component pairs")
        vp = self.plus_values()
        vm = self.minus_values()
        ip = self.r_plus.grid.station(0.0)
        im = self.r_minus.grid.station(0.0)
        worst = max(np.max(np.abs(vp[ip, :, 0])), np.max(np.abs(vm[im, :, 0])))
        worst = max(worst, abs(vp[ip, 0, 1]), abs(vm[im, 0, 1]))
        return float(worst)


def weighted_norm(obj, spec: SobolevSpec) -> float:
    """Weighted Sobolev norm of a grid function or an asymptotic pair.

    For a pair with matching constants this is the common-constant norm
    |c|^2 + |r^+|^2 + |r^-|^2; with distinct constants both contribute:
    |c^+|^2 + |c^-|^2 + |r^+|^2 + |r^-|^2.  Remainders are measured at the
    level given by spec on their own half-cylinders.
    """
    if isinstance(obj, GridFunction):
        return float(np.sqrt(function_norm_sq(obj, spec)))
    pair = obj
    rp = function_norm_sq(pair.r_plus, spec)
    rm = function_norm_sq(pair.r_minus, spec)
    if pair.is_E:
        csq = float(pair.c_plus @ pair.c_plus)
    else:
        csq = float(pair.c_plus @ pair.c_plus + pair.c_minus @ pair.c_minus)
    return float(np.sqrt(csq + rp + rm))


def average_at(u: GridFunction, s0: float) -> np.ndarray:
    """Circle average [u](s0) = int_{S^1} u(s0, t) dt, exact in t."""
    means = u.values.mean(axis=1)  # (n_s, N)
    pos = (s0 - u.grid.s_lo) / u.grid.h_s
    i = int(round(pos))
    if abs(pos - i) < 1e-9 and 0 <= i < u.grid.n_s:
        return means[i].copy()
    return _fd.interpolate_s(means, u.grid.s_lo, u.grid.h_s,
                             np.array([s0]))[0]


def asymptotic_split(h: GridFunction, tol: float = 1e-8):
    """Split a half-cylinder field into (constant, decaying remainder).

    The constant is the circle average at the far boundary; the tail must
    already be stationary there, otherwise the field has no asymptotic
    constant at this resolution and a ValueError reports the oscillation.
    """
    tag = h.grid.domain_tag
    if tag not in ("half_plus", "half_minus"):
        raise ValueError("asymptotic_split expects a half-cylinder field")
    means = h.values.mean(axis=1)
    far = means[-1] if tag == "half_plus" else means[0]
    probe = means[-5:] if tag == "half_plus" else means[:5]
    osc = np.max(np.abs(probe - far[None, :]))
    band = h.values[-1] if tag == "half_plus" else h.values[0]
    osc = max(osc, np.max(np.abs(band - far[None, :])))
    if osc > tol:
        raise ValueError(f"tail oscillates at the boundary: deviation {osc:.3e}")
    r = GridFunction(h.grid, h.values - far[None, None, :])
    return far.copy(), r


def shift(u: GridFunction, R: float, theta: float,
          out_grid: CylinderGrid | None = None) -> GridFunction:
    """Shift map (R, theta, u) -> u(. + R, . + theta).

    Without out_grid the shift must be grid-aligned in s and the window is
    relabeled exactly (no interpolation); the result lives on a biinfinite
    window.  With out_grid the field is evaluated there, order 8 in s and
    exactly in t, provided the shifted window stays inside the data.
    """
    g = u.grid
    if out_grid is None:
        steps = R / g.h_s
        if abs(steps - round(steps)) > 1e-12:
            raise ValueError("default shift needs R to be a multiple of h_s; "
                             "pass out_grid for off-grid shifts")
        new_grid = CylinderGrid(g.n_t, g.h_s, g.s_lo - R, g.s_hi - R, "biinfinite")
        return GridFunction(new_grid, _fd.shift_t(u.values, theta))
    vals = _fd.shift_t(u.values, theta)
    out = _fd.interpolate_s(vals, g.s_lo, g.h_s, out_grid.s_nodes + R)
    return GridFunction(out_grid, out)


def reparametrize(u: GridFunction, c: float, d: float,
                  r: GridFunction) -> GridFunction:
    """Compose u with the coordinate change (s, t) -> (s + c, t + d) + r.

    r is a 2-component field on the target grid; the result samples
    u(s + c + r_1, t + d + r_2) there.  The perturbed s-coordinates must
    stay inside the stored window of u.
    """
    if r.components != 2:
        raise ValueError("coordinate perturbation r needs 2 components")
    tg = r.grid
    s_base = np.broadcast_to(tg.s_nodes[:, None], (tg.n_s, tg.n_t))
    t_base = np.broadcast_to(tg.t_nodes[None, :], (tg.n_s, tg.n_t))
    s_q = s_base + c + r.values[:, :, 0]
    t_q = t_base + d + r.values[:, :, 1]
    out = _fd.eval_at_points(u.values, u.grid.s_lo, u.grid.h_s,
                             s_q.ravel(), t_q.ravel())
    return GridFunction(tg, out.reshape(tg.n_s, tg.n_t, u.components))


def degeneracy_index(coords) -> int:
    """Number of vanishing corner coordinates of a point in [0, inf)^k.

    Comparison is exact: the index is discontinuous by design and counts
    only coordinates that are identically zero.
    """
    coords = np.atleast_1d(np.asarray(coords, dtype=float))
    if np.any(coords < 0.0):
        raise ValueError("corner coordinates must be nonnegative")
    return int(np.sum(coords == 0.0))


def save_grid_function(path: str, u: GridFunction, binary: bool = False):
    """Write a grid function to disk.

    The header line is `n_s,n_t,s_lo,h_s,components,domain_tag`; after it,
    text mode stores one CSV line per node in row-major order (s outer, t
    inner), binary mode stores the raw little-endian float64 samples.
    """
    g = u.grid
    header = f"{g.n_s},{g.n_t},{g.s_lo!r},{g.h_s!r},{u.components},{g.domain_tag}\n"
    if binary:
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(u.values.astype("<f8").tobytes(order="C"))
    else:
        with open(path, "w") as fh:
            fh.write(header)
            flat = u.values.reshape(-1, u.components)
            for row in flat:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_grid_function(path: str) -> GridFunction:
    """Read a grid function written by save_grid_function (either mode)."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        rest = fh.read()
    n_s, n_t, s_lo, h_s, comp, tag = header.split(",")
    n_s, n_t, comp = int(n_s), int(n_t), int(comp)
    s_lo, h_s = float(s_lo), float(h_s)
    grid = CylinderGrid(n_t, h_s, s_lo, s_lo + h_s * (n_s - 1), tag)
    count = n_s * n_t * comp
    if len(rest) == 8 * count:
        values = np.frombuffer(rest, dtype="<f8").reshape(n_s, n_t, comp)
    else:
        text = rest.decode("ascii").strip().splitlines()
        values = np.array([[float(v) for v in line.split(",")] for line in text])
        values = values.reshape(n_s, n_t, comp)
    return GridFunction(grid, values.copy())
