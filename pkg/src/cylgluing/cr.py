"""Cauchy-Riemann operators and solvers on breaking cylinders.

The operators come in three layers.  Pointwise: the flat operator and its
variable-structure version, one half of the complexified derivative taken
in the trivialization fixed by the s-direction.  Global solvers: on the
glued cylinder window the flat operator is inverted per Fourier mode, the
growing homogeneous solution of each frequency pinned at the far end it
grows toward; a dense route assembles the same problem as one sparse
complex system and serves as the brute-force cross-check.  Linearized
theory: the filled section, its linearization (half-cylinder operators
plus a compact seam-band correction), and the weighted least-squares
assembly whose smallest singular value tracks the uniform invertibility
of the family across the gluing parameter.

Frequency conventions follow the rest of the package: the real-field
t-derivative annihilates the Nyquist mode, t-shifts move it as a cosine,
and where a complexified field is expanded the Nyquist bin counts as the
positive frequency n_t / 2.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh, splu

from . import _fd
from .fnspace import (
    DELTA_SUP,
    AsymptoticPair,
    CylinderGrid,
    GridFunction,
    WeightSequence,
    derivative,
)
from .glue import (
    antiglue,
    bump,
    cutoff_beta,
    cutoff_beta_prime,
    hat_glue,
    hat_unglue,
    seam_average,
    seam_geometry,
)
from .profile import GluingParameter, glue_params

__all__ = [
    "ComplexStructureField",
    "standard_structure",
    "deformed_structure",
    "glued_structure",
    "dbar0",
    "dbar_j",
    "solve_dbar_c",
    "solve_dbar_c_dense",
    "solve_dbar_star",
    "star_index_report",
    "window_sigma_report",
    "filler",
    "linearized_L",
    "LinearOperatorAssembly",
    "assemble_L",
    "invertibility_sweep",
    "sweep_to_csv",
    "sweep_to_json",
]

_J = np.array([[0.0, -1.0], [1.0, 0.0]])


# ---------------------------------------------------------------------------
# complex structures


@dataclass(frozen=True)
class ComplexStructureField:
    """A 2x2 matrix field j(s, t) with j^2 = -Id, standard outside a band.

    `entries` has shape (n_s, n_t, 2, 2).  `s0` bounds the deformation:
    outside it j must equal the standard rotation.  On a finite glued
    cylinder the deformation bands sit at both ends (each inherited from
    one half-cylinder), so standardness is required on [s0, R - s0].
    """

    grid: CylinderGrid
    entries: np.ndarray
    s0: float

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.shape != (self.grid.n_s, self.grid.n_t, 2, 2):
            raise ValueError("entries shape does not match the grid")
        sq = np.einsum("stij,stjk->stik", e, e)
        if np.max(np.abs(sq + np.eye(2))) > 1e-12:
            raise ValueError("structure field violates j^2 = -Id")
        s = self.grid.s_nodes
        if self.grid.domain_tag == "finite":
            standard = (s >= self.s0) & (s <= self.grid.R - self.s0)
        elif self.grid.domain_tag == "half_minus":
            standard = s <= -self.s0
        else:
            standard = np.abs(s) >= self.s0
        dev = np.abs(e[standard] - _J)
        if dev.size and np.max(dev) > 1e-12:
            raise ValueError("structure field not standard outside its band")
        object.__setattr__(self, "entries", e)

    @property
    def is_standard(self) -> bool:
        return bool(np.max(np.abs(self.entries - _J)) <= 1e-15)


def standard_structure(grid: CylinderGrid) -> ComplexStructureField:
    """The constant standard structure on any cylinder grid."""
    e = np.broadcast_to(_J, (grid.n_s, grid.n_t, 2, 2)).copy()
    return ComplexStructureField(grid, e, 0.0)


def _shear_entries(v: float, s: np.ndarray, t: np.ndarray, s0: float) -> np.ndarray:
    # conjugate the standard structure by the unipotent shear [[1, v chi], [0, 1]];
    # determinant one keeps j^2 = -Id exact at every node
    chi = bump(s / s0) * 0.5 * (1.0 + np.cos(2.0 * np.pi * t))
    m = v * chi
    e = np.empty(m.shape + (2, 2))
    e[..., 0, 0] = m
    e[..., 0, 1] = -1.0 - m * m
    e[..., 1, 0] = 1.0
    e[..., 1, 1] = -m
    return e


def deformed_structure(
    v: float, grid: CylinderGrid, s0: float = 2.0
) -> ComplexStructureField:
    """The shear family j(v): a bump-supported conjugation of the rotation.

    chi(s, t) = bump(s / s0) (1 + cos 2 pi t) / 2 vanishes for |s| >= s0.
    v = 0 gives the standard structure.
    """
    s = grid.s_nodes[:, None]
    t = grid.t_nodes[None, :]
    return ComplexStructureField(grid, _shear_entries(v, s, t, s0), s0)


def glued_structure(v: float, a, n_t: int, h_s: float, s0: float = 2.0) -> ComplexStructureField:
    """The structure the two half-cylinders induce on the glued cylinder.

    The plus-side field is used up to the seam midpoint and the transported
    minus-side field beyond it; both are standard there provided the seam
    clears the deformation bands, which requires R >= 2 s0 + 4.
    """
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        raise ValueError("a = 0 opens no glued cylinder")
    steps = gp.R / h_s
    m_R = int(round(steps))
    if abs(steps - m_R) * h_s > 1e-6:
        raise ValueError(f"seam length R = {gp.R} must be a multiple of h_s = {h_s}")
    R = m_R * h_s
    if R < 2.0 * s0 + 4.0 - 1e-9:
        raise ValueError(
            f"seam length R = {R} too short for the deformation bands: "
            f"need R >= 2 s0 + 4 = {2.0 * s0 + 4.0}"
        )
    grid = CylinderGrid.finite(R, h_s, n_t)
    s = grid.s_nodes[:, None]
    t = grid.t_nodes[None, :]
    plus = _shear_entries(v, s, t, s0)
    minus = _shear_entries(v, s - R, t - gp.theta, s0)
    e = np.where((s <= 0.5 * R)[:, :, None, None], plus, minus)
    return ComplexStructureField(grid, e, s0)


# ---------------------------------------------------------------------------
# pointwise operators


def dbar0(u: GridFunction) -> GridFunction:
    """Flat Cauchy-Riemann operator (u_s + J u_t) / 2 on a two-field."""
    if u.components != 2:
        raise ValueError("the operator acts on 2-component fields")
    us = derivative(u, (1, 0)).values
    ut = derivative(u, (0, 1)).values
    out = np.empty_like(us)
    out[..., 0] = 0.5 * (us[..., 0] - ut[..., 1])
    out[..., 1] = 0.5 * (us[..., 1] + ut[..., 0])
    return GridFunction(u.grid, out)


def dbar_j(u: GridFunction, j: ComplexStructureField, offset: bool = False) -> GridFunction:
    """Cauchy-Riemann operator for a domain structure j, in the s-frame.

    Evaluates (du + J du j)(d/ds) / 2 = (u_s + J (j11 u_s + j21 u_t)) / 2.
    With `offset` the contribution of the identity chart is added, turning
    the value into the operator applied to id + u; the offset vanishes
    where j is standard, so it is supported in the deformation band.
    """
    if u.components != 2:
        raise ValueError("the operator acts on 2-component fields")
    if u.grid != j.grid:
        raise ValueError("field and structure live on different grids")
    us = derivative(u, (1, 0)).values
    ut = derivative(u, (0, 1)).values
    j11 = j.entries[..., 0, 0]
    j21 = j.entries[..., 1, 0]
    w1 = j11 * us[..., 0] + j21 * ut[..., 0]
    w2 = j11 * us[..., 1] + j21 * ut[..., 1]
    out = np.empty_like(us)
    out[..., 0] = 0.5 * (us[..., 0] - w2)
    out[..., 1] = 0.5 * (us[..., 1] + w1)
    if offset:
        out[..., 0] += 0.5 * (1.0 - j21)
        out[..., 1] += 0.5 * j11
    return GridFunction(u.grid, out)


# ---------------------------------------------------------------------------
# mode-decoupled solvers on the glued window


def _signed_freqs(n_t: int) -> np.ndarray:
    k = np.fft.fftfreq(n_t, d=1.0 / n_t)
    if n_t % 2 == 0:
        k = k.copy()
        k[n_t // 2] = n_t // 2
    return k


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < DELTA_SUP:
        raise ValueError(
            f"weight rate delta = {delta} outside the admissible window "
            f"(0, 2 pi); at 2 pi the first holomorphic mode enters the "
            f"weight class and the inversion degenerates"
        )


def _selection_vec(n_s: int, bc: str, i_bc: int) -> np.ndarray:
    e = np.zeros(n_s)
    if bc == "antipodal":
        e[0] = 1.0
        e[-1] = 1.0
    else:
        e[i_bc] = 1.0
    return e


@lru_cache(maxsize=None)
def _mode_factor(n_s: int, h: float, k: float, bc: str, i_bc: int):
    """Factored normal equations of one mode ODE with one selection row."""
    A = (_fd.diff_matrix(n_s, h, 1)
         - 2.0 * np.pi * k * sparse.identity(n_s)).tocsr()
    e = _selection_vec(n_s, bc, i_bc)
    N = (A.T @ A + sparse.csr_matrix(np.outer(e, e))).tocsc()
    return A, e, splu(N)


def _mode_solve(n_s: int, h: float, k: float, rhs: np.ndarray, bc: str, i_bc: int) -> np.ndarray:
    A, e, lu = _mode_factor(n_s, h, float(k), bc, i_bc)

    def sol(vec):
        if np.iscomplexobj(vec):
            return lu.solve(vec.real) + 1j * lu.solve(vec.imag)
        return lu.solve(vec)

    y = A.T @ rhs
    x = sol(y)
    for _ in range(2):
        x = x + sol(y - A.T @ (A @ x) - (e @ x) * e)
    return x


def _window_geometry(grid: CylinderGrid) -> tuple[float, int]:
    if grid.domain_tag != "infinite_glued":
        raise ValueError("the glued-cylinder solvers need a glued window grid")
    R = grid.R
    return R, grid.station(0.5 * R)


def _solve_modal(eta: GridFunction, k0_bc: str, i_center: int) -> GridFunction:
    grid = eta.grid
    n_s, n_t, h = grid.n_s, grid.n_t, grid.h_s
    F = eta.values[..., 0] + 1j * eta.values[..., 1]
    fhat = np.fft.fft(F, axis=1)
    xhat = np.empty_like(fhat)
    for col, k in enumerate(_signed_freqs(n_t)):
        rhs = 2.0 * fhat[:, col]
        if k > 0:
            xhat[:, col] = _mode_solve(n_s, h, k, rhs, "node", n_s - 1)
        elif k < 0:
            xhat[:, col] = _mode_solve(n_s, h, k, rhs, "node", 0)
        else:
            xhat[:, col] = _mode_solve(n_s, h, 0.0, rhs, k0_bc, i_center)
    zeta = np.fft.ifft(xhat, axis=1)
    return GridFunction(grid, np.stack([zeta.real, zeta.imag], axis=-1))


def _window_checks(a, eta: GridFunction, delta: float) -> tuple[GluingParameter, int]:
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        raise ValueError("a = 0 opens no glued cylinder")
    _check_delta(delta)
    if eta.components != 2:
        raise ValueError("the operator acts on 2-component fields")
    R, i_center = _window_geometry(eta.grid)
    if abs(R - gp.R) > 1e-9:
        raise ValueError("gluing parameter and window grid disagree on R")
    return gp, i_center


def solve_dbar_c(a, eta: GridFunction, delta: float = 0.5) -> GridFunction:
    """Invert the flat operator on the glued cylinder, antipodal constants.

    Per t-mode the equation is a first-order ODE with one free homogeneous
    solution; the growing one is pinned at the far end it grows toward,
    which selects the decaying solution of the untruncated cylinder up to
    a tail error.  The mode-zero antiderivative is normalized antipodally,
    xi_0(lo) + xi_0(hi) = 0, so the solution tends to opposite asymptotic
    constants +-c at the two ends.
    """
    _, i_center = _window_checks(a, eta, delta)
    return _solve_modal(eta, "antipodal", i_center)


def solve_dbar_star(a, eta: GridFunction, delta: float = 0.5) -> GridFunction:
    """Invert the flat operator on the anti-glued cylinder, mean zero.

    Same mode ladder as the antipodal solver; the mode-zero constant is
    fixed by the seam normalization instead: vanishing circle average at
    the midpoint R / 2.  Adding any constant to the output still solves
    the equation, the kernel of the unnormalized operator.
    """
    _, i_center = _window_checks(a, eta, delta)
    return _solve_modal(eta, "node", i_center)


# ---------------------------------------------------------------------------
# dense route: one sparse complex system, the brute-force cross-check


def _t_shift_matrix(n_t: int, theta: float) -> np.ndarray:
    """Real matrix of the spectral shift t -> t + theta (Nyquist as cosine)."""
    if n_t == 1 or theta == 0.0:
        return np.eye(n_t)
    F = np.fft.fft(np.eye(n_t), axis=0)
    k = np.fft.fftfreq(n_t, d=1.0 / n_t)
    phase = np.exp(2j * np.pi * k * theta)
    if n_t % 2 == 0:
        phase[n_t // 2] = np.cos(np.pi * n_t * theta)
    return np.real(np.fft.ifft(phase[:, None] * F, axis=0))


def _t_derivative_matrix(n_t: int) -> np.ndarray:
    """Real matrix of the first t-derivative (Nyquist annihilated)."""
    if n_t == 1:
        return np.zeros((1, 1))
    F = np.fft.fft(np.eye(n_t), axis=0)
    k = np.fft.fftfreq(n_t, d=1.0 / n_t)
    diag = 2j * np.pi * k
    if n_t % 2 == 0:
        diag = diag.copy()
        diag[n_t // 2] = 0.0
    return np.real(np.fft.ifft(diag[:, None] * F, axis=0))


def _complex_operator(grid: CylinderGrid) -> sparse.csr_matrix:
    Ds = _fd.diff_matrix(grid.n_s, grid.h_s, 1)
    Dt = sparse.csr_matrix(_fd.spectral_diff_matrix(grid.n_t, 1))
    It = sparse.identity(grid.n_t, format="csr")
    Is = sparse.identity(grid.n_s, format="csr")
    return (0.5 * (sparse.kron(Ds, It) + 1j * sparse.kron(Is, Dt))).tocsr()


def _mode_row(grid: CylinderGrid, i_s: int, k: float) -> np.ndarray:
    """Functional zeta_hat_k(s_i) / n_t on the flattened complex field."""
    row = np.zeros(grid.n_s * grid.n_t, dtype=complex)
    t = grid.t_nodes
    row[i_s * grid.n_t : (i_s + 1) * grid.n_t] = np.exp(-2j * np.pi * k * t) / grid.n_t
    return row


def _dense_system(grid: CylinderGrid, k0: str, with_constant: bool):
    """PDE rows plus far-end mode rows; returns (A, number of PDE rows)."""
    n_s, n_t = grid.n_s, grid.n_t
    M = _complex_operator(grid)
    extra = []
    for k in _signed_freqs(n_t):
        if k > 0:
            extra.append(_mode_row(grid, n_s - 1, k))
        elif k < 0:
            extra.append(_mode_row(grid, 0, k))
    if k0 == "antipodal":
        extra.append(_mode_row(grid, 0, 0.0) + _mode_row(grid, n_s - 1, 0.0))
    elif k0 == "constant":
        extra.append(_mode_row(grid, n_s - 1, 0.0))
        extra.append(_mode_row(grid, 0, 0.0))
    elif k0 == "center":
        _, i_center = _window_geometry(grid)
        extra.append(_mode_row(grid, i_center, 0.0))
    elif k0 != "none":
        raise ValueError(f"unknown mode-zero selection {k0!r}")
    A = sparse.vstack([M, sparse.csr_matrix(np.array(extra))]).tocsr()
    if with_constant:
        if k0 != "constant":
            raise ValueError("the constant column needs the constant far rows")
        # one extra complex unknown c, entering only the two mode-zero rows:
        # zeta_0(hi) = +c and zeta_0(lo) = -c
        col = np.zeros(A.shape[0], dtype=complex)
        col[M.shape[0] + len(extra) - 2] = -1.0
        col[M.shape[0] + len(extra) - 1] = 1.0
        A = sparse.hstack([A, sparse.csr_matrix(col[:, None])]).tocsr()
    return A, M.shape[0]


def _normal_solve(A: sparse.csr_matrix, b: np.ndarray) -> np.ndarray:
    N = (A.getH() @ A).tocsc()
    lu = splu(N)
    y = A.getH() @ b
    x = lu.solve(y)
    for _ in range(2):
        x = x + lu.solve(y - N @ x)
    return x


def solve_dbar_c_dense(a, eta: GridFunction, delta: float = 0.5) -> GridFunction:
    """Dense-route twin of solve_dbar_c: one complex least-squares system.

    Carries the asymptotic constant as an explicit extra unknown coupled
    to the two far-field mode-zero rows; exists as the independent check
    of the mode-decoupled fast path.
    """
    _window_checks(a, eta, delta)
    grid = eta.grid
    A, n_pde = _dense_system(grid, "constant", with_constant=True)
    F = (eta.values[..., 0] + 1j * eta.values[..., 1]).ravel()
    b = np.zeros(A.shape[0], dtype=complex)
    b[:n_pde] = F
    x = _normal_solve(A, b)
    zeta = x[: grid.n_s * grid.n_t].reshape(grid.n_s, grid.n_t)
    return GridFunction(grid, np.stack([zeta.real, zeta.imag], axis=-1))


def _station_weight(grid: CylinderGrid, delta: float) -> np.ndarray:
    """Trapezoid weights h e^{2 delta |s - s_c|} / n_t, one per station.

    Norm reports use the endpoint-corrected quadrature, whose correction
    weights are not all positive.  Least-squares rows and mass matrices
    need a positive diagonal, so the assemblies keep the same measure in
    its plain trapezoid form.
    """
    w = np.full(grid.n_s, grid.h_s)
    w[0] *= 0.5
    w[-1] *= 0.5
    s = grid.s_nodes
    return w * np.exp(2.0 * delta * np.abs(s - grid.weight_center)) / grid.n_t


def _node_weight(grid: CylinderGrid, delta: float) -> np.ndarray:
    """Station weight times e^{2 delta |s - s_c|}, one entry per grid node."""
    return np.repeat(_station_weight(grid, delta), grid.n_t)


def star_index_report(a, grid: CylinderGrid, delta: float = 0.5, seed: int = 0) -> dict:
    """Kernel and surjectivity evidence for the unnormalized operator.

    Assembles the mode system without any mode-zero selection, forms the
    Gram matrix under the decaying weight (the class where the constants
    live), and reads the bottom of its spectrum through the real form,
    where the complex kernel dimension doubles.  Two eigenvalues at
    rounding level against a gapped third witness the two-real-dimensional
    kernel of constants; a seeded decaying right-hand side solved to small
    relative residual witnesses surjectivity.
    """
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        raise ValueError("a = 0 opens no anti-glued cylinder")
    _check_delta(delta)
    A, n_pde = _dense_system(grid, "none", with_constant=False)
    w = np.ones(A.shape[0])
    w[:n_pde] = _node_weight(grid, -delta)
    G = (A.getH() @ sparse.diags(w) @ A).tocsr()
    Gr = sparse.bmat([[G.real, -G.imag], [G.imag, G.real]], format="csc")
    scale = float(abs(Gr).max())
    vals = eigsh(Gr, k=3, sigma=-1e-10 * scale, which="LM",
                 return_eigenvectors=False)
    vals = np.sort(np.abs(vals))

    rng = np.random.default_rng(seed)
    s = grid.s_nodes[:, None]
    t = grid.t_nodes[None, :]
    c = grid.weight_center
    f = np.exp(-((s - c) ** 2)) * (
        rng.normal() + rng.normal() * np.cos(2 * np.pi * t)
        + rng.normal() * np.sin(4 * np.pi * t)
    )
    g = np.exp(-((s - c) ** 2)) * (rng.normal() + rng.normal() * np.sin(2 * np.pi * t))
    eta = GridFunction(grid, np.stack([f, g], axis=-1))
    xi = solve_dbar_star(gp, eta, delta)
    res = dbar0(xi) - eta
    wgt = _node_weight(grid, -delta)
    num = float(np.sqrt(wgt @ (res.values ** 2).sum(axis=-1).ravel()))
    den = float(np.sqrt(wgt @ (eta.values ** 2).sum(axis=-1).ravel()))
    return {
        "near_kernel": vals[:2],
        "spectral_gap": float(vals[2]),
        "kernel_dim": int(np.sum(vals < 1e-6 * vals[2])),
        "surjectivity_residual": num / den,
    }


def window_sigma_report(a, grid: CylinderGrid,
                        deltas: Sequence[float] = (1.0, DELTA_SUP)) -> dict:
    """Weighted smallest singular value of the glued-window assembly.

    Under the decay-enforcing weight e^{2 delta |s - R/2|} on both sides
    of the quotient, truncation leaves sigma_min of order e^{-delta W}
    plus the discretization floor while delta stays under 2 pi; at
    delta = 2 pi the first holomorphic mode ladder enters the weight
    class and sigma_min collapses to the floor.  The ratio between the
    first and last requested delta quantifies the degeneration.
    """
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if gp.broken:
        raise ValueError("a = 0 opens no glued cylinder")
    A, n_pde = _dense_system(grid, "center", with_constant=False)
    out = {"delta": [], "sigma_min": []}
    for d in deltas:
        nodal = _node_weight(grid, d)
        w = np.ones(A.shape[0])
        w[:n_pde] = nodal
        G = (A.getH() @ sparse.diags(w) @ A).tocsc()
        Wd = sparse.diags(nodal).tocsc()
        lam = eigsh(G, k=1, M=Wd, sigma=-1e-12, which="LM",
                    return_eigenvectors=False)
        out["delta"].append(float(d))
        out["sigma_min"].append(float(np.sqrt(abs(lam[0]))))
    out["collapse_ratio"] = out["sigma_min"][0] / max(out["sigma_min"][-1], 1e-300)
    return out


# ---------------------------------------------------------------------------
# the filled section and its linearization


def filler(v: float, a, h_pair: AsymptoticPair, base: Optional[AsymptoticPair] = None,
           s0: float = 2.0) -> AsymptoticPair:
    """The filled Cauchy-Riemann section at (v, a, h).

    The glued part of the output is the variable-structure operator (with
    identity-chart offset) applied to the glued map; the anti-glued part
    is the flat operator applied to the anti-glued perturbation.  Undoing
    the hat total gluing turns the two fields into a pair of half-cylinder
    targets with no asymptotic constants.  On the retraction image the
    anti-glued input vanishes and the output carries no ghost component;
    off it the flat part is nonzero, which is what makes the zero sets of
    the section and of the glued equation match.
    """
    if h_pair.components != 2:
        raise ValueError("the section acts on 2-component pairs")
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    u = h_pair if base is None else base + h_pair
    zero = np.zeros(2)
    if gp.broken:
        jp = deformed_structure(v, u.r_plus.grid, s0)
        jm = deformed_structure(v, u.r_minus.grid, s0)
        return AsymptoticPair(
            zero,
            zero.copy(),
            dbar_j(u.r_plus, jp, offset=True),
            dbar_j(u.r_minus, jm, offset=True),
        )
    grid_p = u.r_plus.grid
    j_glued = glued_structure(v, gp, grid_p.n_t, grid_p.h_s, s0)
    w_offset = hat_glue(gp, u)
    rhs_q = dbar_j(w_offset, j_glued, offset=True)

    remainder = AsymptoticPair(zero, zero.copy(), h_pair.r_plus, h_pair.r_minus)
    rhs_p = dbar0(antiglue(gp, remainder))
    return hat_unglue(gp, rhs_q, rhs_p)


def _plus_transport(geo, minus_values: np.ndarray) -> np.ndarray:
    """Minus-side samples at (s - R, .), zero outside the overlap."""
    out = np.zeros_like(minus_values)
    lo = max(0, geo.m_R - geo.m_S)
    hi = min(geo.m_S, geo.m_R)
    out[lo : hi + 1] = minus_values[lo - geo.m_R + geo.m_S : hi - geo.m_R + geo.m_S + 1]
    return out


def _minus_transport(geo, plus_values: np.ndarray) -> np.ndarray:
    """Plus-side samples at (s' + R, .), zero outside the overlap."""
    out = np.zeros_like(plus_values)
    lo = max(0, geo.m_S - geo.m_R)
    hi = min(geo.m_S, 2 * geo.m_S - geo.m_R)
    out[lo : hi + 1] = plus_values[lo + geo.m_R - geo.m_S : hi + geo.m_R - geo.m_S + 1]
    return out


def linearized_L(v: float, a, h_pair: AsymptoticPair, s0: float = 2.0) -> AsymptoticPair:
    """The linearization of the filled section at the zero perturbation.

    The two half-cylinder operators act side by side; opening the seam
    adds a correction supported where the cutoff moves:

      plus side:   (b'/g) [ b A + (b - 1) B ]        at  s
      minus side:  (b'/g) [ (1 - b) A + b B ]        at  s - R

    with b, b', g evaluated at s - R/2, A the difference and B the sum of
    the two remainders in seam coordinates, B recentered by twice their
    seam average.  Asymptotic constants drop out of both brackets, so
    constants alone produce no correction, and at a = 0 the correction is
    absent entirely.
    """
    if h_pair.components != 2:
        raise ValueError("the operator acts on 2-component pairs")
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    jp = deformed_structure(v, h_pair.r_plus.grid, s0)
    jm = deformed_structure(v, h_pair.r_minus.grid, s0)
    eta_p = dbar_j(h_pair.r_plus, jp).values
    eta_m = dbar_j(h_pair.r_minus, jm).values
    zero = np.zeros(2)
    if not gp.broken:
        geo = seam_geometry(gp, h_pair)
        s_p = h_pair.r_plus.grid.s_nodes
        s_m = h_pair.r_minus.grid.s_nodes
        b = cutoff_beta(s_p - 0.5 * geo.R)[:, None, None]
        bp = cutoff_beta_prime(s_p - 0.5 * geo.R)[:, None, None]
        g = 2.0 * b * b - 2.0 * b + 1.0
        bt = cutoff_beta(s_m + 0.5 * geo.R)[:, None, None]
        bpt = cutoff_beta_prime(s_m + 0.5 * geo.R)[:, None, None]
        gt = 2.0 * bt * bt - 2.0 * bt + 1.0

        rp = h_pair.r_plus.values
        rm = h_pair.r_minus.values
        rm_on_p = _plus_transport(geo, _fd.shift_t(rm, -geo.theta))
        rp_on_m = _minus_transport(geo, _fd.shift_t(rp, geo.theta))
        av = seam_average(geo, h_pair)[None, None, :]

        A_p = rp - rm_on_p
        B_p = rp + rm_on_p - 2.0 * av
        eta_p = eta_p + (bp / g) * (b * A_p + (b - 1.0) * B_p)

        A_m = rp_on_m - rm
        B_m = rp_on_m + rm - 2.0 * av
        eta_m = eta_m + (bpt / gt) * ((1.0 - bt) * A_m + bt * B_m)
    return AsymptoticPair(
        zero,
        zero.copy(),
        GridFunction(h_pair.r_plus.grid, eta_p),
        GridFunction(h_pair.r_minus.grid, eta_m),
    )


# ---------------------------------------------------------------------------
# weighted least-squares assembly of the linearization


def _pack_side(values: np.ndarray) -> np.ndarray:
    return np.concatenate([values[..., 0].ravel(), values[..., 1].ravel()])


def _unpack_side(vec: np.ndarray, n_s: int, n_t: int) -> np.ndarray:
    nn = n_s * n_t
    return np.stack([vec[:nn].reshape(n_s, n_t), vec[nn:].reshape(n_s, n_t)], axis=-1)


def _dv_block(grid: CylinderGrid, j: ComplexStructureField) -> sparse.csr_matrix:
    """Matrix of the variable-structure operator on one packed side."""
    Dn = sparse.kron(_fd.diff_matrix(grid.n_s, grid.h_s, 1),
                     sparse.identity(grid.n_t), format="csr")
    Tn = sparse.kron(sparse.identity(grid.n_s),
                     sparse.csr_matrix(_t_derivative_matrix(grid.n_t)), format="csr")
    d11 = sparse.diags(j.entries[..., 0, 0].ravel())
    d21 = sparse.diags(j.entries[..., 1, 0].ravel())
    P = (d11 @ Dn + d21 @ Tn).tocsr()
    return (0.5 * sparse.bmat([[Dn, -P], [P, Dn]], format="csr")).tocsr()


def _index_transport(n_s: int, rows: np.ndarray, cols: np.ndarray) -> sparse.csr_matrix:
    return sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n_s, n_s))


def _comp_diag(correction: sparse.spmatrix) -> sparse.csr_matrix:
    """The same scalar node action on both components of a packed side."""
    return sparse.block_diag([correction, correction], format="csr")


@dataclass
class LinearOperatorAssembly:
    """Discrete linearization as a weighted least-squares system.

    Rows: the two half-cylinder equations with the seam correction folded
    in, then far-end mode rows selecting remainder decay.  Columns: the
    four asymptotic constants followed by the free remainder values; the
    boundary normalization is eliminated exactly into the constant
    columns, so every unpacked solution satisfies it identically.  The
    normal equations are factored once and reused; sigma_min is the
    smallest singular value between the weighted graph norms, the
    discrete stand-in for the uniform lower bound of the family.
    """

    v: float
    gp: GluingParameter
    m: int
    delta: float
    grid_plus: CylinderGrid
    grid_minus: CylinderGrid
    matrix: sparse.csr_matrix
    elimination: sparse.csr_matrix
    free_index: np.ndarray
    row_weights: np.ndarray
    col_weights: np.ndarray
    n_rows_pde: int
    _lu: object = field(default=None, repr=False)

    def _factor(self):
        if self._lu is None:
            W = sparse.diags(self.row_weights)
            N = (self.matrix.T @ W @ self.matrix).tocsc()
            self._lu = (splu(N), N)
        return self._lu

    def pack(self, h: AsymptoticPair) -> np.ndarray:
        """Free coordinates of a pair satisfying the boundary normalization."""
        full = np.concatenate(
            [h.c_plus, h.c_minus,
             _pack_side(h.r_plus.values), _pack_side(h.r_minus.values)]
        )
        return np.concatenate([full[:4], full[self.free_index]])

    def unpack(self, x: np.ndarray) -> AsymptoticPair:
        full = self.elimination @ x
        npp = 2 * self.grid_plus.n_s * self.grid_plus.n_t
        vals_p = _unpack_side(full[4 : 4 + npp], self.grid_plus.n_s, self.grid_plus.n_t)
        vals_m = _unpack_side(full[4 + npp :], self.grid_minus.n_s, self.grid_minus.n_t)
        return AsymptoticPair(
            full[0:2].copy(),
            full[2:4].copy(),
            GridFunction(self.grid_plus, vals_p),
            GridFunction(self.grid_minus, vals_m),
        )

    def apply(self, h: AsymptoticPair) -> AsymptoticPair:
        """PDE rows of the assembled operator on h (far rows dropped)."""
        y = self.matrix @ self.pack(h)
        npp = 2 * self.grid_plus.n_s * self.grid_plus.n_t
        zero = np.zeros(2)
        return AsymptoticPair(
            zero,
            zero.copy(),
            GridFunction(self.grid_plus,
                         _unpack_side(y[:npp], self.grid_plus.n_s, self.grid_plus.n_t)),
            GridFunction(self.grid_minus,
                         _unpack_side(y[npp : self.n_rows_pde],
                                      self.grid_minus.n_s, self.grid_minus.n_t)),
        )

    def solve(self, rhs: AsymptoticPair) -> AsymptoticPair:
        """Weighted least-squares solution of L h = rhs."""
        b = np.zeros(self.matrix.shape[0])
        npp = 2 * self.grid_plus.n_s * self.grid_plus.n_t
        b[:npp] = _pack_side(rhs.r_plus.values)
        b[npp : self.n_rows_pde] = _pack_side(rhs.r_minus.values)
        lu, N = self._factor()
        y = self.matrix.T @ (self.row_weights * b)
        x = lu.solve(y)
        for _ in range(2):
            x = x + lu.solve(y - N @ x)
        return self.unpack(x)

    def sigma_min(self) -> float:
        _, N = self._factor()
        Wd = sparse.diags(self.col_weights).tocsc()
        lam = eigsh(N, k=1, M=Wd, sigma=0.0, which="LM", return_eigenvectors=False)
        return float(np.sqrt(abs(lam[0])))


def assemble_L(v: float, a, big_s: float, h_s: float = 1.0 / 8.0, n_t: int = 16,
               m: int = 0, weights: Optional[WeightSequence] = None,
               s0: float = 2.0) -> LinearOperatorAssembly:
    """Assemble the linearization on half-cylinders [0, S] and [-S, 0].

    The seam midpoint R / 2 must land on a grid station and leave room
    for the far rows: S >= R / 2 + 2.  At a = 0 the two sides decouple
    entirely and the assembly is the broken-limit operator.
    """
    gp = a if isinstance(a, GluingParameter) else glue_params(a)
    if weights is None:
        weights = WeightSequence.default("E")
    delta = weights[m]
    if n_t < 4:
        raise ValueError("the far-field mode rows need n_t >= 4")
    gplus = CylinderGrid.half_plus(big_s, h_s, n_t)
    gminus = CylinderGrid.half_minus(big_s, h_s, n_t)
    n_s = gplus.n_s
    nn = n_s * n_t
    if not gp.broken:
        steps = gp.R / h_s
        if abs(steps - round(steps)) > 1e-6 or int(round(steps)) % 2 != 0:
            raise ValueError("seam length R and midpoint R / 2 must be grid stations")
        if big_s < 0.5 * gp.R + 2.0:
            raise ValueError("half-cylinder too short for the seam: need S >= R/2 + 2")

    blk_pp = _dv_block(gplus, deformed_structure(v, gplus, s0))
    blk_mm = _dv_block(gminus, deformed_structure(v, gminus, s0))
    blk_pm = sparse.csr_matrix((2 * nn, 2 * nn))
    blk_mp = sparse.csr_matrix((2 * nn, 2 * nn))

    if not gp.broken:
        m_R = int(round(gp.R / h_s))
        m_S = int(round(big_s / h_s))
        b = cutoff_beta(gplus.s_nodes - 0.5 * gp.R)
        bp = cutoff_beta_prime(gplus.s_nodes - 0.5 * gp.R)
        g = 2.0 * b * b - 2.0 * b + 1.0
        bt = cutoff_beta(gminus.s_nodes + 0.5 * gp.R)
        bpt = cutoff_beta_prime(gminus.s_nodes + 0.5 * gp.R)
        gt = 2.0 * bt * bt - 2.0 * bt + 1.0

        # transports: index shift across the seam times the t-rotation
        rows_p = np.arange(max(0, m_R - m_S), min(m_S, m_R) + 1)
        Tp = sparse.kron(_index_transport(n_s, rows_p, rows_p - m_R + m_S),
                         sparse.csr_matrix(_t_shift_matrix(n_t, -gp.theta)),
                         format="csr")
        rows_m = np.arange(max(0, m_S - m_R), min(m_S, 2 * m_S - m_R) + 1)
        Tm = sparse.kron(_index_transport(n_s, rows_m, rows_m + m_R - m_S),
                         sparse.csr_matrix(_t_shift_matrix(n_t, gp.theta)),
                         format="csr")

        # seam-average functional: half the remainder circle mean each side
        av_p = np.zeros(nn)
        av_p[(m_R // 2) * n_t : (m_R // 2 + 1) * n_t] = 0.5 / n_t
        av_m = np.zeros(nn)
        av_m[(m_S - m_R // 2) * n_t : (m_S - m_R // 2 + 1) * n_t] = 0.5 / n_t
        row_av_p = sparse.csr_matrix(av_p[None, :])
        row_av_m = sparse.csr_matrix(av_m[None, :])

        def col(coefs: np.ndarray) -> sparse.csr_matrix:
            return sparse.csr_matrix(np.repeat(coefs, n_t)[:, None])

        def nd(coefs: np.ndarray) -> sparse.dia_matrix:
            return sparse.diags(np.repeat(coefs, n_t))

        # plus rows: b'/g [ b (r+ - r~-) + (b - 1)(r+ + r~- - 2 av) ]
        c_self = bp * (2.0 * b - 1.0) / g
        c_other = -bp / g
        c_av = -2.0 * bp * (b - 1.0) / g
        blk_pp = blk_pp + _comp_diag(nd(c_self) + col(c_av) @ row_av_p)
        blk_pm = blk_pm + _comp_diag(nd(c_other) @ Tp + col(c_av) @ row_av_m)

        # minus rows: b'/g [ (1 - b)(r+~ - r-) + b (r+~ + r- - 2 av) ]
        c_self2 = bpt * (2.0 * bt - 1.0) / gt
        c_other2 = bpt / gt
        c_av2 = -2.0 * bpt * bt / gt
        blk_mm = blk_mm + _comp_diag(nd(c_self2) + col(c_av2) @ row_av_m)
        blk_mp = blk_mp + _comp_diag(nd(c_other2) @ Tm + col(c_av2) @ row_av_p)

    # far rows: every remainder mode vanishes at the far ends; growing
    # complexified modes carry Re/Im pairs, mode zero the plain means
    t = gplus.t_nodes
    far_rows = []
    for k in range(1, n_t // 2 + 1):
        cosr = np.cos(2 * np.pi * k * t) / n_t
        sinr = np.sin(2 * np.pi * k * t) / n_t
        for h1, h2 in ((cosr, sinr), (-sinr, cosr)):
            row = np.zeros(4 * nn)
            row[(n_s - 1) * n_t : n_s * n_t] = h1
            row[nn + (n_s - 1) * n_t : nn + n_s * n_t] = h2
            far_rows.append(row)
    for comp in range(2):
        row = np.zeros(4 * nn)
        row[comp * nn + (n_s - 1) * n_t : comp * nn + n_s * n_t] = 1.0 / n_t
        far_rows.append(row)
    for k in range(1, n_t // 2):
        cosr = np.cos(2 * np.pi * k * t) / n_t
        sinr = np.sin(2 * np.pi * k * t) / n_t
        for h1, h2 in ((cosr, -sinr), (sinr, cosr)):
            row = np.zeros(4 * nn)
            row[2 * nn : 2 * nn + n_t] = h1
            row[3 * nn : 3 * nn + n_t] = h2
            far_rows.append(row)
    for comp in range(2):
        row = np.zeros(4 * nn)
        row[(2 + comp) * nn : (2 + comp) * nn + n_t] = 1.0 / n_t
        far_rows.append(row)
    # the real-field t-derivative annihilates the Nyquist bin, which makes
    # its content constant-homogeneous per side like mode zero: it needs a
    # pin at this far end too (the plus end already has its k = n_t/2 rows)
    alt = ((-1.0) ** np.arange(n_t)) / n_t
    for comp in range(2):
        row = np.zeros(4 * nn)
        row[(2 + comp) * nn : (2 + comp) * nn + n_t] = alt
        far_rows.append(row)
    far_block = sparse.csr_matrix(np.array(far_rows))

    OP = sparse.bmat(
        [
            [None, blk_pp, blk_pm],
            [None, blk_mp, blk_mm],
            [sparse.csr_matrix((far_block.shape[0], 4)),
             far_block[:, : 2 * nn], far_block[:, 2 * nn :]],
        ],
        format="csr",
    )

    # elimination: the boundary normalization h(0, t) in {0} x R, h(0, 0) = 0
    # pins remainder entries to -c on each side's boundary circle
    flat = np.arange(2 * nn)
    comp = flat // nn
    i_s = (flat % nn) // n_t
    j_t = flat % n_t
    elim_p1 = (comp == 0) & (i_s == 0)
    elim_p2 = (comp == 1) & (i_s == 0) & (j_t == 0)
    free_p = ~(elim_p1 | elim_p2)
    elim_m1 = (comp == 0) & (i_s == n_s - 1)
    elim_m2 = (comp == 1) & (i_s == n_s - 1) & (j_t == 0)
    free_m = ~(elim_m1 | elim_m2)
    n_free = int(free_p.sum() + free_m.sum())

    rows_t = np.concatenate(
        [np.arange(4),
         4 + flat[elim_p1], 4 + flat[elim_p2],
         4 + 2 * nn + flat[elim_m1], 4 + 2 * nn + flat[elim_m2],
         4 + flat[free_p], 4 + 2 * nn + flat[free_m]]
    )
    cols_t = np.concatenate(
        [np.arange(4),
         np.zeros(elim_p1.sum(), dtype=int), np.ones(elim_p2.sum(), dtype=int),
         np.full(elim_m1.sum(), 2), np.full(elim_m2.sum(), 3),
         4 + np.arange(n_free)]
    )
    data_t = np.concatenate(
        [np.ones(4),
         -np.ones(int(elim_p1.sum() + elim_p2.sum() + elim_m1.sum() + elim_m2.sum())),
         np.ones(n_free)]
    )
    T = sparse.csr_matrix((data_t, (rows_t, cols_t)), shape=(4 + 4 * nn, 4 + n_free))
    free_index = np.concatenate([4 + flat[free_p], 4 + 2 * nn + flat[free_m]])

    A = (OP @ T).tocsr()

    wq_p = _station_weight(gplus, delta)
    wq_m = _station_weight(gminus, delta)
    full_w = np.concatenate(
        [np.ones(4),
         np.tile(np.repeat(wq_p, n_t), 2),
         np.tile(np.repeat(wq_m, n_t), 2)]
    )
    # a far row stands in for the n_t nodal decay conditions on its circle,
    # so it carries the aggregated nodal weight there; weight-one far rows
    # would let constant-homogeneous directions shrink sigma by e^{-delta S}
    w_end_p = float(wq_p[-1]) * n_t
    w_end_m = float(wq_m[0]) * n_t
    far_w = np.concatenate(
        [np.full(n_t + 2, w_end_p), np.full(n_t + 2, w_end_m)]
    )
    row_w = np.concatenate(
        [full_w[4 : 4 + 2 * nn], full_w[4 + 2 * nn :], far_w]
    )
    col_w = np.concatenate([np.ones(4), full_w[free_index]])

    return LinearOperatorAssembly(
        v=v,
        gp=gp,
        m=m,
        delta=delta,
        grid_plus=gplus,
        grid_minus=gminus,
        matrix=A,
        elimination=T,
        free_index=free_index,
        row_weights=row_w,
        col_weights=col_w,
        n_rows_pde=4 * nn,
    )


def invertibility_sweep(v: float, a_values: Sequence, m: int = 0,
                        h_s: float = 1.0 / 8.0, n_t: int = 16,
                        s_margin: float = 4.0,
                        weights: Optional[WeightSequence] = None,
                        workers: Optional[int] = None) -> list[dict]:
    """Smallest weighted singular value of L across a gluing-parameter sweep.

    Each parameter gets half-cylinders just long enough for its seam,
    S = R / 2 + s_margin (and 2 s_margin when broken), so the sweep probes
    the uniformity of the lower bound rather than one fixed truncation.
    """

    def one(a) -> dict:
        gp = a if isinstance(a, GluingParameter) else glue_params(a)
        big_s = 2.0 * s_margin if gp.broken else 0.5 * gp.R + s_margin
        asm = assemble_L(v, gp, big_s, h_s=h_s, n_t=n_t, m=m, weights=weights)
        return {
            "a_real": float(np.real(gp.a)),
            "a_imag": float(np.imag(gp.a)),
            "R": float(gp.R),
            "sigma_min": asm.sigma_min(),
        }

    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, a_values))
    return [one(a) for a in a_values]


def sweep_to_csv(rows: Sequence[dict], path: str) -> None:
    """Deterministic CSV of a sweep report (broken rows print R = inf)."""
    with open(path, "w") as f:
        f.write("a_real,a_imag,R,sigma_min\n")
        for r in rows:
            f.write("%.12e,%.12e,%.12e,%.12e\n"
                    % (r["a_real"], r["a_imag"], r["R"], r["sigma_min"]))


def sweep_to_json(rows: Sequence[dict], path: str) -> None:
    """JSON twin of the CSV sweep report; non-finite entries become null."""
    safe = [
        {k: (v if isinstance(v, str) or np.isfinite(v) else None)
         for k, v in r.items()}
        for r in rows
    ]
    with open(path, "w") as f:
        json.dump(safe, f, indent=1, sort_keys=True)
        f.write("\n")
