"""Walk through a small constrained problem by hand: build, solve, read the ranks, recover.

    python demos/qcqp_walkthrough.py
"""

import numpy as np

from momentsos import Polynomial, Pop, build_Qn, certify, moment_matrix, qcqp_recover, rank_report, solve

# min -x^2 subject to 1 - x^2 >= 0: the minimum -1 is attained at x = -1 and x = 1
(x,) = Polynomial.variables(1)
P = Pop(-x**2, [1 - x**2])
print("objective half-degree", P.d_f, "constraint half-degrees", P.d_j, "v =", P.v)

# Order 1 already gives the right value, but the moment matrix cannot tell us so
for n in (1, 2, 3):
    res = solve(build_Qn(P, n))
    rep = rank_report(res.moments, n)
    print(f"order {n}: rho = {res.value:+.9f}, ranks of M_0..M_{n} = {rep.ranks}")

# At order 1 the matrix [[1, 0], [0, 1]] has rank 2 > n - v + 1 = 1
res1 = solve(build_Qn(P, 1))
print(np.round(moment_matrix(res1.moments, 1), 6))
print("order 1 certificate:", certify(P, 1, res1).kind)

# Order 2: rank 2 <= 2, so the value is exact
res2 = solve(build_Qn(P, 2))
cert = certify(P, 2, res2)
print("order 2 certificate:", cert.kind, "-", cert.details["fired"])

# The minimizers come from walking down the truncations until the ranks stop growing
rec = qcqp_recover(res2.moments, P, 2, res2.value)
for step in rec.steps:
    print("  t = %d: rank M_t = %d, rank M_(t-1) = %d -> %s" % step)
for p, w in zip(rec.measure.points, rec.measure.weights):
    print(f"  atom x = {p[0]:+.8f} with weight {w:.6f}")
