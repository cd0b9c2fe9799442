"""Unconstrained minimization: one relaxation, a rank bound, and atoms found on the projective side.

    python demos/unconstrained_route.py
"""

import numpy as np

from momentsos import (
    Polynomial,
    Pop,
    build_unconstrained,
    certify,
    dehomogenize,
    extract_homogeneous_atoms,
    oracle,
    solve,
)

x, y = Polynomial.variables(2)

# Four global minimizers at (+-1, +-1), value 0
f = (x**2 - 1) ** 2 + (y**2 - 1) ** 2
res = solve(build_unconstrained(f))
cert = certify(Pop(f), 2, res)
print("rho =", round(res.value, 10), "| certificate:", cert.kind, "| rank test:", cert.details["fired"])

# Atoms are first recovered in R^3 with the extra coordinate x0 in front
lifted = extract_homogeneous_atoms(res.moments)
print("lifted atoms (x0, x, y):")
print(np.round(lifted.points, 6))

# Dividing by x0 gives back points of the plane; atoms with x0 = 0 would sit at infinity
deh = dehomogenize(lifted, 2)
print("minimizers:")
print(np.round(deh.measure.points, 6), "discarded mass", deh.discarded_mass)

# The Motzkin polynomial is nonnegative but not a sum of squares, so the relaxation has no finite value
m = x**4 * y**2 + x**2 * y**4 - 3 * x**2 * y**2 + 1
res = solve(build_unconstrained(m))
print("Motzkin: solver status", res.status, "| certificate:", certify(Pop(m), 3, res).kind)
orc = oracle(Pop(m), [(-2, 2), (-2, 2)])
print("  grid + local search finds", orc.value, "at", np.round(orc.points, 4).tolist())
