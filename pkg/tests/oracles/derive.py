"""Independent derivations of the reference values frozen into the test suite.

Nothing here imports ``momentsos``: monomials are enumerated by brute force,
moment matrices are built by hand from point evaluations, and relaxation
values come from an independent cvxpy model.  Run with

    python tests/oracles/derive.py

and compare against the constants used in the tests.  Needs cvxpy
(``pip install cvxpy``), which the package itself does not use.
"""

import itertools
import math

import numpy as np


def brute_exponents(d, k):
    return [e for e in itertools.product(range(k + 1), repeat=d) if sum(e) <= k]


def dirac_mm(points, weights, k):
    d = len(points[0])
    rows = brute_exponents(d, k)
    M = np.zeros((len(rows), len(rows)))
    for x, w in zip(points, weights):
        v = np.array([np.prod([xi ** a for xi, a in zip(x, e)]) for e in rows])
        M += w * np.outer(v, v)
    return M


def rank(M, tol=1e-8):
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * s[0]))


def cvx_relaxation(f, gs, d, n):
    """min L(f) s.t. L(1) = 1, M_n(L) >= 0, M_{n-dj}(g L) >= 0, built from dict polynomials."""
    import cvxpy as cp

    mons = brute_exponents(d, 2 * n)
    y = {e: cp.Variable() for e in mons}

    def add(a, b):
        return tuple(i + j for i, j in zip(a, b))

    def mm(k, g):
        rows = brute_exponents(d, k)
        return cp.bmat([[sum(c * y[add(add(a, b), gm)] for gm, c in g.items()) for b in rows] for a in rows])

    one = {(0,) * d: 1.0}
    cons = [y[(0,) * d] == 1]
    M = mm(n, one)
    cons.append(0.5 * (M + M.T) >> 0)
    for g in gs:
        dj = math.ceil(max(sum(e) for e in g) / 2)
        L = mm(n - dj, g)
        cons.append(0.5 * (L + L.T) >> 0)
    prob = cp.Problem(cp.Minimize(sum(c * y[e] for e, c in f.items())), cons)
    prob.solve(solver="CLARABEL")
    return prob.status, prob.value


def cvx_sos_dual(f, d, n):
    """max lam s.t. f - lam = v^T Q v, Q >= 0."""
    import cvxpy as cp

    rows = brute_exponents(d, n)
    Q = cp.Variable((len(rows), len(rows)), symmetric=True)
    lam = cp.Variable()
    coeff = {}
    for i, a in enumerate(rows):
        for j, b in enumerate(rows):
            e = tuple(p + q for p, q in zip(a, b))
            coeff.setdefault(e, []).append(Q[i, j])
    cons = [Q >> 0]
    for e in brute_exponents(d, 2 * n):
        target = f.get(e, 0.0) - (lam if sum(e) == 0 else 0.0)
        cons.append(sum(coeff.get(e, [0])) == target)
    prob = cp.Problem(cp.Maximize(lam), cons)
    prob.solve(solver="CLARABEL")
    return prob.status, prob.value


def main():
    print("basis sizes (d, k) -> count:",
          {(d, k): len(brute_exponents(d, k)) for d, k in [(2, 1), (2, 2), (3, 4)]})
    print("x1*x2 - 3 at (2, 5):", 2 * 5 - 3)
    motz = {(4, 2): 1.0, (2, 4): 1.0, (2, 2): -3.0, (0, 0): 1.0}
    print("homogenized Motzkin (x0 first):", {(6 - sum(e),) + e: c for e, c in motz.items()})
    print("riesz of 1/2(d_-1 + d_1) on x^4 - x:", 0.5 * ((1 - (-1)) + (1 - 1)))
    M = dirac_mm([(-1.0,), (1.0,)], [0.5, 0.5], 2)
    print("M_2 of 1/2(d_-1 + d_1):", M.tolist(), "eig", np.linalg.eigvalsh(M), "rank", rank(M))
    # localizing (1 - x^2) at delta_0, k=1 and delta_2, k=0
    v0 = np.array([1.0, 0.0])
    print("L_1(1-x^2) at delta_0:", ((1 - 0.0 ** 2) * np.outer(v0, v0)).tolist(), "L_0 at delta_2:", 1 - 2.0 ** 2)
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(6, 2))
    print("6 generic atoms d=2: rank M_2 =", rank(dirac_mm(pts, np.ones(6) / 6, 2)),
          "rank M_1 =", rank(dirac_mm(pts, np.ones(6) / 6, 1)))
    two = dirac_mm([(0.0,), (1.0,)], [0.5, 0.5], 2)
    print("1/2(d_0 + d_1): rank M_2 =", rank(two), "rank M_1 =", rank(dirac_mm([(0.0,), (1.0,)], [0.5, 0.5], 1)))

    # QCQP: min x1^2 + x2^2 s.t. x1 + x2 >= 1.  KKT: 2x = mu (1, 1), x1 + x2 = 1 -> x = (1/2, 1/2)
    print("KKT optimum: value", 0.25 + 0.25, "at (0.5, 0.5)")
    f1 = {(2, 0): 1.0, (0, 2): 1.0}
    g1 = {(1, 0): 1.0, (0, 1): 1.0, (0, 0): -1.0}
    for n in (1, 2, 3):
        print(f"QCQP rho_{n}:", cvx_relaxation(f1, [g1], 2, n))
    f2 = {(2,): -1.0}
    g2 = {(0,): 1.0, (2,): -1.0}
    for n in (1, 2, 3, 4):
        print(f"two-minimizer rho_{n}:", cvx_relaxation(f2, [g2], 1, n))
    f3 = {(4, 0): 1.0, (2, 0): -2.0, (0, 4): 1.0, (0, 2): -2.0, (0, 0): 2.0}
    print("four-minimizer rho:", cvx_relaxation(f3, [], 2, 2))
    print("x^2 + 1 SOS dual:", cvx_sos_dual({(2,): 1.0, (0,): 1.0}, 1, 1))
    print("(x-1)^2 SOS dual:", cvx_sos_dual({(2,): 1.0, (1,): -2.0, (0,): 1.0}, 1, 1))
    print("Motzkin SOS dual:", cvx_sos_dual(motz, 2, 3))
    print("Motzkin moment side:", cvx_relaxation(motz, [], 2, 3))

    ax = np.linspace(-2, 2, 201)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    F = X ** 4 * Y ** 2 + X ** 2 * Y ** 4 - 3 * X ** 2 * Y ** 2 + 1
    idx = np.argwhere(F <= F.min() + 1e-6)
    print("Motzkin grid min:", F.min(), "at", [(X[i, j], Y[i, j]) for i, j in idx])
    F4 = (X ** 2 - 1) ** 2 + (Y ** 2 - 1) ** 2
    idx = np.argwhere(F4 <= F4.min() + 1e-6)
    print("four-minimizer grid min:", F4.min(), "at", [(X[i, j], Y[i, j]) for i, j in idx])


if __name__ == "__main__":
    main()
