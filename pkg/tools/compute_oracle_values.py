"""Compute reference values for the test suite with high-precision arithmetic.

Every closed-form constant asserted by the tests is evaluated here with
mpmath at 50 significant digits, independently of the package code, and
frozen into tests/_frozen.py.  Run from the repository root:

    python tools/compute_oracle_values.py

The generated file is committed; regenerating it must be a no-op unless
this script changes.
"""

import io
import os

import mpmath as mp

mp.mp.dps = 50


def phi(r):
    return mp.e ** (1 / mp.mpf(r)) - mp.e


def phi_inv(y):
    return 1 / mp.log(mp.e + mp.mpf(y))


def profile_B(x, c):
    return phi_inv(phi(x) + mp.mpf(c))


def bump(x):
    x = mp.mpf(x)
    if abs(x) >= 1:
        return mp.mpf(0)
    return mp.exp(-1 / (1 - x * x))


def main():
    vals = {}

    # gluing profile and its inverse
    vals["PHI_HALF"] = phi("0.5")                  # e^2 - e
    vals["PHI_TENTH"] = phi("0.1")                 # e^10 - e
    vals["PHI_QUARTER"] = phi("0.25")              # e^4 - e
    vals["PHI_INV_100"] = phi_inv(100)             # 1/ln(e + 100)
    vals["PHI_INV_PHI_HALF"] = phi_inv(vals["PHI_HALF"])   # must be 0.5

    # profile shift B(x, c) = phi^{-1}(phi(x) + c)
    vals["B_HALF_PHIHALF"] = profile_B("0.5", vals["PHI_HALF"])  # 1/ln(2e^2 - e)
    vals["B_X001_C1"] = profile_B("0.01", 1)
    vals["B_X001_C100"] = profile_B("0.01", 100)
    vals["B_X001_CM100"] = profile_B("0.01", -100)

    # derivatives of B in x near the degenerate corner x = 0 (all orders
    # above the first flatten out; the first tends to 1)
    for c in (1, 100):
        d1 = mp.diff(lambda x: profile_B(x, c), mp.mpf("0.01"), 1)
        d2 = mp.diff(lambda x: profile_B(x, c), mp.mpf("0.01"), 2)
        vals[f"DB_DX_X001_C{c}"] = d1
        vals[f"D2B_DX2_X001_C{c}"] = d2

    # first derivative of R(a) = phi(|a|) along the real axis at a = 0.1,
    # and the bound ratio |DR| / (R (ln R)^2) at the same point
    a = mp.mpf("0.1")
    dxR = -mp.e ** (1 / a) / a ** 2
    R = phi(a)
    vals["DXR_TENTH"] = dxR
    vals["RATIO_DR_TENTH"] = abs(dxR) / (R * mp.log(R) ** 2)

    # theta derivative bound ratio |D theta| / (ln R)^1 at |a| = 0.1:
    # for a = x + iy, 2*pi*theta has gradient (-y, x)/|a|^2, so |D theta|
    # = 1/(2 pi |a|)
    vals["RATIO_DTHETA_TENTH"] = (1 / (2 * mp.pi * a)) / mp.log(R)

    # L^2 norm of e^{-s} on the half line
    vals["L2_EXP_HALFLINE"] = 1 / mp.sqrt(2)

    # normalizers for the two compactly supported model functions:
    # cutoff beta integrates the bump exp(-1/(1-x^2)); the projection
    # direction of the rank-one retraction is the same bump scaled to
    # unit L^2 norm
    I1 = mp.quad(bump, [-1, 1])
    I2 = mp.quad(lambda x: bump(x) ** 2, [-1, 1])
    vals["BUMP_INTEGRAL"] = I1
    vals["BUMP_SQ_INTEGRAL"] = I2
    vals["BUMP_L2_NORMALIZER"] = 1 / mp.sqrt(I2)

    # reference values of the transition cutoff beta built from the bump:
    # beta(s) = (int_s^1 bump) / (int_{-1}^1 bump) for s in [-1, 1]
    for tag, s in (("M09", "-0.9"), ("M05", "-0.5"), ("P03", "0.3"), ("P09", "0.9")):
        val = mp.quad(bump, [mp.mpf(s), 1]) / I1
        vals[f"CUTOFF_BETA_{tag}"] = val

    lines = io.StringIO()
    lines.write('"""Frozen reference constants.\n\n')
    lines.write("Generated by tools/compute_oracle_values.py; do not edit by hand.\n")
    lines.write('"""\n\n')
    for name, v in vals.items():
        lines.write("%s = %s\n" % (name, mp.nstr(v, 17)))

    out = os.path.join(os.path.dirname(__file__), "..", "tests", "_frozen.py")
    with open(out, "w") as f:
        f.write(lines.getvalue())
    print(lines.getvalue())


if __name__ == "__main__":
    main()
