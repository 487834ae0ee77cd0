"""Exponential gluing profile and the associated shift calculus.

The profile phi(r) = exp(1/r) - e turns a modulus |a| in (0, 1] into a seam
length R = phi(|a|); a = 0 is the broken configuration with R = infinity.
The induced shift B(x, c) = phi_inv(phi(x) + c) extends smoothly to x = 0
with B(0, c) = 0, D_x B(0, c) = 1 and all higher x-derivatives vanishing,
which is what makes the exponential profile usable for smooth gluing.
"""

from dataclasses import dataclass

import numpy as np

from ._fd import fornberg_weights

E = float(np.e)
TWO_PI = 2.0 * np.pi

#: Largest admissible |c| in the shift calculus; beyond this the uniformity
#: constants of the derivative bounds degrade.
C_MAX = 100.0


def phi(r):
    """Gluing profile phi(r) = exp(1/r) - e on (0, 1]."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0) or np.any(r > 1.0):
        raise ValueError("phi requires 0 < r <= 1")
    with np.errstate(over="ignore"):
        out = np.exp(1.0 / r) - E
    return out if out.ndim else float(out)


def phi_inv(y):
    """Inverse profile phi_inv(y) = 1 / log(e + y) on [0, infinity)."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0.0):
        raise ValueError("phi_inv requires y >= 0")
    out = 1.0 / np.log(E + y)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GluingParameter:
    """Polar data of a gluing parameter a = |a| exp(-2 pi i theta).

    R = phi(|a|) is the seam length; theta is the seam twist in [0, 1).
    At a = 0 the configuration is broken: R is infinite and theta is None.
    """

    a: complex
    modulus: float
    R: float
    theta: float | None

    @property
    def broken(self) -> bool:
        return self.modulus == 0.0


def glue_params(a) -> GluingParameter:
    """Polar decomposition of a gluing parameter with |a| < 1."""
    a = complex(a)
    mod = abs(a)
    if mod >= 1.0:
        raise ValueError("gluing parameter needs |a| < 1")
    if mod == 0.0:
        return GluingParameter(a=0j, modulus=0.0, R=np.inf, theta=None)
    with np.errstate(over="ignore"):
        R = float(np.exp(1.0 / mod) - E)
    theta = float((-np.angle(a) / TWO_PI) % 1.0)
    return GluingParameter(a=a, modulus=mod, R=R, theta=theta)


def profile_shift_B(x, c):
    """B(x, c) = phi_inv(phi(x) + c), evaluated in overflow-free form.

    Valid for x in [0, 1), |c| <= C_MAX and phi(x) + c >= 0; B(0, c) = 0.
    The stable form B = x / (1 + x log1p(c exp(-1/x))) never forms phi(x)
    itself, so it survives x down to the underflow scale.
    """
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(x < 0.0) or np.any(x >= 1.0):
        raise ValueError("profile_shift_B requires 0 <= x < 1")
    if np.any(np.abs(c) > C_MAX):
        raise ValueError(f"profile_shift_B requires |c| <= {C_MAX}")
    x, c = np.broadcast_arrays(x, c)
    out = np.zeros(x.shape)
    pos = x > 0.0
    xp = x[pos]
    cp = c[pos]
    arg = cp * np.exp(-1.0 / xp)
    if np.any(arg <= -1.0):
        raise ValueError("profile_shift_B outside domain: phi(x) + c < 0")
    denom = 1.0 + xp * np.log1p(arg)
    # denom >= x is exactly the condition phi(x) + c >= 0, i.e. B <= 1.
    if np.any(denom < xp * (1.0 - 1e-14)):
        raise ValueError("profile_shift_B outside domain: phi(x) + c < 0")
    out[pos] = xp / denom
    return out if out.ndim else float(out)


def planar_shift_f(z, c):
    """Planar shift f(z, c) = B(|z|, c) z / |z|, with f(0, c) = 0.

    Rotation-equivariant by construction: f(e^{i phi} z, c) = e^{i phi} f(z, c).
    """
    z = np.asarray(z, dtype=complex)
    c = np.asarray(c, dtype=float)
    z, c = np.broadcast_arrays(z, c)
    mod = np.abs(z)
    out = np.zeros(z.shape, dtype=complex)
    pos = mod > 0.0
    out[pos] = profile_shift_B(mod[pos], c[pos]) * z[pos] / mod[pos]
    return out if out.ndim else complex(out)


def grad_R(a) -> tuple[float, float]:
    """Exact gradient of R(a) = phi(|a|) in the real coordinates a = x + i y."""
    a = complex(a)
    r = abs(a)
    if r == 0.0 or r > 1.0:
        raise ValueError("grad_R requires 0 < |a| <= 1")
    factor = -np.exp(1.0 / r) / r ** 3
    return factor * a.real, factor * a.imag


def grad_theta(a) -> tuple[float, float]:
    """Exact gradient of the twist theta(a) = (-arg(a) / 2 pi) mod 1."""
    a = complex(a)
    r2 = abs(a) ** 2
    if r2 == 0.0:
        raise ValueError("grad_theta requires a != 0")
    return a.imag / (TWO_PI * r2), -a.real / (TWO_PI * r2)


def dR_dmodulus(modulus: float) -> float:
    """Exact derivative of R along the modulus: d phi / dr at r = |a|."""
    if modulus <= 0.0 or modulus > 1.0:
        raise ValueError("dR_dmodulus requires 0 < |a| <= 1")
    return float(-np.exp(1.0 / modulus) / modulus ** 2)


def _tensor_fd(f, x0: float, y0: float, h: float, orders: int) -> dict:
    """Mixed partials of f(x, y) up to total order `orders` on a 9x9 stencil."""
    nodes = (np.arange(9) - 4) * h
    grid = np.array([[f(x0 + dx, y0 + dy) for dy in nodes] for dx in nodes])
    wx = fornberg_weights(0.0, nodes, orders)
    out = {}
    for i in range(orders + 1):
        for j in range(orders + 1 - i):
            out[(i, j)] = float(wx[:, i] @ grid @ wx[:, j])
    return out


def check_profile_derivative_bounds(order: int, a_sweep) -> dict:
    """Measure the profile derivative bounds over a sweep of parameters.

    For each a in the sweep, mixed partials of R and theta up to the given
    total order are computed by centered 9-point tensor stencils at step
    0.01 |a|^2, and compared against the shapes R (log R)^{2 |alpha|} and
    (log R)^{|alpha|}.  First-order entries are cross-checked against the
    exact gradients.  Returns per-parameter rows and overall extrema of the
    ratios; the bounds hold iff the ratios stay finite and stable.
    """
    if order < 1 or order > 4:
        raise ValueError("supported derivative orders: 1..4")
    rows = []
    for a in a_sweep:
        a = complex(a)
        mod = abs(a)
        if mod == 0.0:
            raise ValueError("derivative sweep needs a != 0")
        h = 0.01 * mod ** 2
        R = phi(mod)
        logR = np.log(R)

        def R_of(x, y):
            return phi(np.hypot(x, y))

        def theta_of(x, y):
            # Continuous branch; sweeps should avoid the negative real axis.
            return -np.arctan2(y, x) / TWO_PI

        dR = _tensor_fd(R_of, a.real, a.imag, h, order)
        dth = _tensor_fd(theta_of, a.real, a.imag, h, order)
        gx, gy = grad_R(a)
        tx, ty = grad_theta(a)
        first_err = max(abs(dR[(1, 0)] - gx), abs(dR[(0, 1)] - gy)) / max(abs(gx), abs(gy))
        first_err_theta = max(abs(dth[(1, 0)] - tx), abs(dth[(0, 1)] - ty)) / max(abs(tx), abs(ty))
        entries = []
        for (i, j), val in dR.items():
            q = i + j
            if q == 0 or q > order:
                continue
            entries.append({
                "alpha": (i, j),
                "dR": val,
                "ratio_R": abs(val) / (R * logR ** (2 * q)),
                "dtheta": dth[(i, j)],
                "ratio_theta": abs(dth[(i, j)]) / logR ** q,
            })
        rows.append({
            "a": a,
            "R": R,
            "gradient_check_R": first_err,
            "gradient_check_theta": first_err_theta,
            "entries": entries,
        })
    ratios_R = [e["ratio_R"] for row in rows for e in row["entries"]]
    ratios_t = [e["ratio_theta"] for row in rows for e in row["entries"]]
    return {
        "order": order,
        "rows": rows,
        "max_ratio_R": max(ratios_R),
        "max_ratio_theta": max(ratios_t),
        "all_finite": bool(np.all(np.isfinite(ratios_R)) and np.all(np.isfinite(ratios_t))),
    }
