"""Recover atomic measures (global minimizers) from pseudo-moment sequences.

The core routine follows the usual multiplication-matrix recipe: an
orthonormal basis of the column space of ``M_n(phi)`` is reduced to column
echelon form, which picks a monomial basis ``w`` of the quotient space;
multiplication-by-``x_j`` matrices are read from the echelon form and jointly
triangularized through a random combination.  When the echelon basis
contains monomials of top degree (the moment matrix is not flat), the kernel
polynomials of ``M_n`` are multiplied by monomials to form a Macaulay matrix
of higher degree whose null space plays the role of the column space.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import nnls

from .moments import (
    MomentSequence,
    homogenize_sequence,
    moment_matrix,
    vandermonde,
)
from .poly import Polynomial, Pop, basis_size, evaluate, monomial_basis, monomial_index

log = logging.getLogger(__name__)


class ExtractionFailed(RuntimeError):
    """The column space is not closed under multiplication within tolerance."""


class RecoveryFailed(RuntimeError):
    """No termination branch of the truncation loop fired."""


@dataclass
class AtomicMeasure:
    points: np.ndarray  # (r, d)
    weights: np.ndarray  # (r,)
    provenance: str = ""
    residuals: dict = field(default_factory=dict)
    margins: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.points.size == 0:
            self.points = self.points.reshape(0, self.points.shape[-1] if self.points.ndim == 2 else 0)
        if len(self.weights) != len(self.points):
            raise ValueError(f"{len(self.weights)} weights for {len(self.points)} points")
        if np.any(self.weights <= 0):
            raise ValueError("atom weights must be strictly positive")

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def nvars(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.weights)

    def moments(self, degree: int) -> MomentSequence:
        return MomentSequence(self.nvars, degree, vandermonde(self.points, degree) @ self.weights)

    def to_dict(self) -> dict:
        return {
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
            "mass": self.mass,
            "provenance": self.provenance,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "support_margins": None if self.margins is None else np.asarray(self.margins).tolist(),
        }


# ---------------------------------------------------------------------------
# linear algebra helpers


def _range_and_kernel(M, tol):
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    w, V = w[::-1], V[:, ::-1]
    top = max(w[0], 0.0)
    r = int(np.sum(w > tol * top)) if top > 0 else 0
    return V[:, :r], V[:, r:], r


def _echelon(N, tol):
    """Column echelon form of ``N`` with pivot rows picked in basis order.

    Returns ``(U, pivots)`` with ``U[pivots] == I``.  Within a row the
    largest remaining entry is used as pivot.
    """
    U = np.array(N, dtype=float)
    nrow, ncol = U.shape
    pivots = []
    free = list(range(ncol))
    for i in range(nrow):
        if not free:
            break
        row = U[i]
        ref = max(np.max(np.abs(row)), 1.0)
        c = max(free, key=lambda k: abs(row[k]))
        if abs(row[c]) <= tol * ref:
            continue
        U[:, c] /= U[i, c]
        for k in range(ncol):
            if k != c:
                U[:, k] -= U[i, k] * U[:, c]
        pivots.append((i, c))
        free.remove(c)
    order = [c for _, c in pivots]
    return U[:, order], [i for i, _ in pivots]


def _shifted(poly_vec, d, k, D, gamma):
    """Coefficients of ``x^gamma * p`` (``p`` on the degree-k basis) on the degree-D basis."""
    src = monomial_basis(d, k)
    idx = monomial_index(d, D)
    out = np.zeros(basis_size(d, D))
    for e, c in zip(src, poly_vec):
        if c != 0.0:
            out[idx[tuple(a + b for a, b in zip(e, gamma))]] = c
    return out


def _macaulay_null_space(K, d, n, D, tol):
    rows = []
    for t in range(D - n + 1):
        for gamma in monomial_basis(d, t)[basis_size(d, t - 1) if t else 0:]:
            for col in K.T:
                rows.append(_shifted(col, d, n, D, gamma))
    if not rows:
        return np.eye(basis_size(d, D))
    A = np.array(rows)
    _, sv, Vt = np.linalg.svd(A)
    rank = int(np.sum(sv > tol * sv[0])) if sv.size and sv[0] > 0 else 0
    return Vt[rank:].T


def _points_from_basis(N, d, D, tol, rng):
    """Atoms from a basis of the span of ``v_D(x(i))`` (columns of ``N``)."""
    exps = monomial_basis(d, D)
    idx = monomial_index(d, D)
    U, piv = _echelon(N, tol)
    basis = [exps[i] for i in piv]
    if any(sum(e) >= D for e in basis):
        return None
    r = len(basis)
    if r == 0:
        raise ExtractionFailed("empty column space")
    mult = []
    for j in range(d):
        rows = [idx[tuple(a + (1 if k == j else 0) for k, a in enumerate(e))] for e in basis]
        mult.append(U[rows, :])
    scale = max(1.0, max(np.max(np.abs(Nj)) for Nj in mult))
    for a in range(d):
        for b in range(a + 1, d):
            comm = mult[a] @ mult[b] - mult[b] @ mult[a]
            if np.max(np.abs(comm)) > 1e3 * tol * scale ** 2 * r:
                raise ExtractionFailed(
                    f"multiplication matrices do not commute (residual {np.max(np.abs(comm)):.2e})"
                )
    coef = rng.random(d)
    coef /= coef.sum()
    Nc = sum(c * Nj for c, Nj in zip(coef, mult))
    T, Q = sla.schur(Nc, output="real")
    sub = np.abs(np.diag(T, -1)) if r > 1 else np.zeros(0)
    if sub.size and np.max(sub) > 1e2 * tol * max(1.0, np.max(np.abs(T))):
        raise ExtractionFailed("complex eigenvalues in the multiplication matrices")
    pts = np.array([[Q[:, i] @ Nj @ Q[:, i] for Nj in mult] for i in range(r)])
    return pts, basis


def fit_weights(points, phi: MomentSequence, degree: int | None = None, prune: float = 1e-8):
    """Nonnegative weights matching ``phi`` up to ``degree``; tiny weights are pruned."""
    degree = phi.degree if degree is None else degree
    points = np.atleast_2d(points)
    target = phi.values[: basis_size(phi.nvars, degree)]
    scale = 1.0 / (1.0 + np.abs(target))
    for _ in range(len(points) + 1):
        V = vandermonde(points, degree) * scale[:, None]
        w, _ = nnls(V, target * scale)
        keep = w > prune
        if keep.all():
            return points, w
        points = points[keep]
        if len(points) == 0:
            break
    raise ExtractionFailed("all weights vanished in the moment fit")


def extract_atoms(
    phi: MomentSequence,
    r: int | None = None,
    tol: float = 1e-6,
    fit_degree: int | None = None,
    max_extra_degree: int = 3,
    seed: int = 0,
    k: int | None = None,
) -> AtomicMeasure:
    """Atoms and weights of a measure behind ``M_k(phi)`` (``k`` defaults to the top order).

    ``r`` overrides the numerical rank.  Weights are fitted by NNLS on the
    moments of degree at most ``fit_degree`` (default ``2k - 1``).
    """
    d = phi.nvars
    k = phi.order if k is None else k
    if k < 1:
        raise ValueError("need a sequence of order at least 1")
    M = moment_matrix(phi, k)
    rng = np.random.default_rng(seed)
    rangeV, K, rank = _range_and_kernel(M, tol)
    if r is not None:
        w, V = np.linalg.eigh(M)
        V = V[:, ::-1]
        rangeV, K, rank = V[:, :r], V[:, r:], r
    if rank == 0:
        raise ExtractionFailed("zero moment matrix")
    fit_degree = 2 * k - 1 if fit_degree is None else fit_degree

    found = None
    D_used = k
    for D in range(k, k + max_extra_degree + 1):
        N = rangeV if D == k else _macaulay_null_space(K, d, k, D, tol)
        if N.shape[1] == 0:
            break
        found = _points_from_basis(N, d, D, tol, rng)
        if found is not None:
            D_used = D
            break
    if found is None:
        raise ExtractionFailed(
            f"no multiplication structure up to degree {k + max_extra_degree} (rank {rank})"
        )
    pts, basis = found
    pts, wts = fit_weights(pts, phi, fit_degree)
    mu = AtomicMeasure(pts, wts, provenance="flat" if D_used == k else f"kernel-expanded(D={D_used})")
    mu.residuals = {
        f"moments<= {fit_degree}": verify_moments(mu, phi, fit_degree).residual,
        f"moments<= {phi.degree}": verify_moments(mu, phi, phi.degree).residual,
    }
    log.debug("extracted %d atoms from rank %d, basis %s", len(mu), rank, basis)
    return mu


# ---------------------------------------------------------------------------
# homogeneous route


def transform_hom_moments(phi: MomentSequence, T) -> MomentSequence:
    """Moments of the homogenized functional after the change ``y' = T y``.

    ``phi`` is read as the homogeneous functional ``L`` on forms of degree
    ``phi.degree`` in ``(x0, x)``.  Entry ``b`` of the result is ``L((T y)^b)``,
    i.e. the value on ``y'^b`` with ``y' = T y``, stored along the affine
    indexing with the first new coordinate as the chart variable.
    """
    T = np.asarray(T, dtype=float)
    d, D = phi.nvars, phi.degree
    idx = monomial_index(d, D)
    out = np.zeros(len(idx))
    unit = [tuple(int(i == q) for i in range(d + 1)) for q in range(d + 1)]
    # new coordinate k as a linear form in the old ones
    new_in_old = [Polynomial(d + 1, {unit[q]: T[k, q] for q in range(d + 1)}) for k in range(d + 1)]
    for p, a in enumerate(monomial_basis(d, D)):
        full = (D - sum(a),) + a
        poly = Polynomial.constant(d + 1, 1.0)
        for k, e in enumerate(full):
            if e:
                poly = poly * new_in_old[k] ** e
        out[p] = sum(c * phi.values[idx[e[1:]]] for e, c in poly.items())
    return MomentSequence(d, D, out)


def extract_homogeneous_atoms(
    phi: MomentSequence,
    tol: float = 1e-6,
    seed: int = 0,
    charts: int = 4,
    accept: float = 1e-6,
) -> AtomicMeasure:
    """Atoms in ``R^(d+1)`` (``x0`` first) representing the homogenization of ``phi``.

    The homogeneous moment matrix coincides entrywise with ``M_n(phi)``, so
    the first attempt runs the affine extraction in the chart ``x0 = 1``
    (multiplication by ``x_j / x0``).  Atoms with ``x0 = 0`` are invisible
    in that chart; if the fit is poor, random charts ``x0 + c.x = 1`` are
    tried as well and the best fit is kept.
    """
    d, D = phi.nvars, phi.degree
    phit = homogenize_sequence(phi)
    rng = np.random.default_rng(seed)
    best = None
    for attempt in range(charts + 1):
        T = np.eye(d + 1)
        if attempt:
            second = sum(phi[tuple(2 * int(i == j) for i in range(d))] for j in range(d))
            spread = np.sqrt(max(second / max(phi.values[0], 1e-12), 0.0))
            T[0, 1:] = rng.normal(size=d) / (1.0 + spread)
        chart = phi if attempt == 0 else transform_hom_moments(phi, T)
        try:
            mu = extract_atoms(chart, tol=tol, fit_degree=D, seed=seed + attempt)
        except ExtractionFailed as exc:
            log.debug("chart %d failed: %s", attempt, exc)
            continue
        res = verify_moments(mu, chart, D).residual
        # back to original homogeneous coordinates: a = T^-1 (1, u)
        lifted = np.hstack([np.ones((len(mu), 1)), mu.points]) @ np.linalg.inv(T).T
        cand = AtomicMeasure(lifted, mu.weights, provenance=f"homogeneous chart {attempt}; {mu.provenance}")
        cand.residuals = {"homogeneous moments": res}
        if best is None or res < best.residuals["homogeneous moments"]:
            best = cand
        if res <= accept:
            break
    if best is None:
        raise ExtractionFailed("homogeneous extraction failed in every chart")
    best.residuals["homogenized sequence"] = float(np.max(np.abs(phit.values - _hom_moments(best, D))
                                                          / (1.0 + np.abs(phit.values))))
    return best


def _hom_moments(mu: AtomicMeasure, D: int) -> np.ndarray:
    d = mu.nvars - 1
    exps = np.array([(D - sum(a),) + a for a in monomial_basis(d, D)])
    V = np.prod(mu.points[None, :, :] ** exps[:, None, :], axis=2)
    return V @ mu.weights


@dataclass
class Dehomogenized:
    measure: AtomicMeasure
    discarded_mass: float
    discarded: int


def dehomogenize(mu_t: AtomicMeasure, n: int, x0_tol: float | None = None) -> Dehomogenized:
    """Map atoms ``(x0, x)`` to ``x / x0`` with weight ``lam * x0^(2n)``.

    Atoms with ``|x0| <= x0_tol`` (default ``1e-6 * max|x0|``) are dropped
    and their weight reported.
    """
    x0 = mu_t.points[:, 0]
    if x0_tol is None:
        x0_tol = 1e-6 * (np.max(np.abs(x0)) if len(x0) else 0.0)
    keep = np.abs(x0) > x0_tol
    if not keep.any():
        raise ValueError("every atom has x0 = 0: no finite atom to dehomogenize")
    pts = mu_t.points[keep, 1:] / x0[keep, None]
    wts = mu_t.weights[keep] * x0[keep] ** (2 * n)
    out = AtomicMeasure(pts, wts, provenance=f"dehomogenized({mu_t.provenance})")
    return Dehomogenized(out, float(mu_t.weights[~keep].sum()), int((~keep).sum()))


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class SupportReport:
    margins: np.ndarray  # (atoms, constraints): g_j(x(i))
    scales: np.ndarray
    passed: bool

    @property
    def min_margin(self) -> float:
        return float(self.margins.min()) if self.margins.size else float("inf")


def verify_support(mu: AtomicMeasure, P: Pop, tol: float = 1e-6) -> SupportReport:
    """``g_j(x(i))`` for every atom and constraint; passes iff all ``>= -tol * (1 + |g_j|)``."""
    if mu.nvars != P.nvars:
        raise ValueError(f"atoms live in R^{mu.nvars}, problem in R^{P.nvars}")
    margins = np.array([[evaluate(g, x) for g in P.constraints] for x in mu.points]).reshape(len(mu), P.m)
    scales = np.array([1.0 + np.linalg.norm(list(g.terms.values())) for g in P.constraints])
    passed = bool(np.all(margins >= -tol * scales[None, :])) if margins.size else True
    mu.margins = margins
    return SupportReport(margins, scales, passed)


@dataclass(frozen=True)
class MomentCheck:
    residual: float
    degree: int
    passed: bool


def verify_moments(mu: AtomicMeasure, phi: MomentSequence, up_to_degree: int | None = None,
                   tol: float = 1e-6) -> MomentCheck:
    """Max relative moment mismatch ``|phi_a - sum_i lam_i x(i)^a| / (1 + |phi_a|)``."""
    up_to_degree = phi.degree if up_to_degree is None else up_to_degree
    if up_to_degree > phi.degree:
        raise ValueError(f"degree {up_to_degree} exceeds the sequence degree {phi.degree}")
    target = phi.values[: basis_size(phi.nvars, up_to_degree)]
    got = vandermonde(mu.points, up_to_degree) @ mu.weights
    res = float(np.max(np.abs(target - got) / (1.0 + np.abs(target))))
    return MomentCheck(res, up_to_degree, res <= tol)


def witness_polynomial(points) -> Polynomial:
    """``prod_i ||x - x(i)||^2``: vanishes exactly on the given points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) == 0:
        raise ValueError("need at least one point")
    d = points.shape[1]
    xs = Polynomial.variables(d)
    p = Polynomial.constant(d, 1.0)
    for pt in points:
        p = p * sum(((xj - c) ** 2 for xj, c in zip(xs, pt)), Polynomial.constant(d, 0.0))
    return p


# ---------------------------------------------------------------------------
# minimizer recovery


@dataclass
class Recovery:
    measure: AtomicMeasure
    steps: list  # (order, rank M_order, rank M_{order-1}, decision)
    order: int


def _rank(M, tol):
    w = np.linalg.eigvalsh(M)
    top = max(w[-1], 0.0)
    return int(np.sum(w > tol * top)) if top > 0 else 0


def qcqp_recover(phi: MomentSequence, P: Pop, n: int | None = None, rho: float | None = None,
                 tol: float = 1e-6, value_tol: float = 1e-5, seed: int = 0) -> Recovery:
    """Global minimizers of a QCQP from an optimal ``phi`` of its order-``n`` relaxation.

    Walks down the truncations ``mu^t = (phi_a)_{|a| <= 2t}``: stops at the
    first ``t`` with ``rank M_{t-1} = rank M_t`` (flat, extract) or at
    ``t = 1`` with rank one (Dirac at the first moments).
    """
    n = phi.order if n is None else n
    if P.v != 1 or P.objective.degree > 2:
        raise ValueError("qcqp_recover needs a QCQP (deg f <= 2, v = 1)")
    f = P.objective
    rho = riesz_value(phi, f) if rho is None else rho
    steps = []
    for t in range(n, 0, -1):
        mu_t = phi.restrict(2 * t)
        rt = _rank(moment_matrix(mu_t, t), tol)
        rlow = _rank(moment_matrix(mu_t, t - 1), tol)
        if t == 1 and rt == 1:
            steps.append((t, rt, rlow, "dirac"))
            meas = AtomicMeasure(mu_t.first_moments()[None, :], [mu_t.values[0]], provenance="dirac(order 1)")
            break
        if rt == rlow:
            steps.append((t, rt, rlow, "flat"))
            try:
                meas = extract_atoms(mu_t, r=rt, tol=tol, fit_degree=2 * t, seed=seed)
            except ExtractionFailed as exc:
                raise RecoveryFailed(f"flat at order {t} but extraction failed: {exc}") from exc
            meas.provenance = f"flat(order {t}); {meas.provenance}"
            break
        steps.append((t, rt, rlow, "descend"))
    else:
        raise RecoveryFailed(f"no flat truncation found; rank decisions {steps}")

    support = verify_support(meas, P, tol=value_tol)
    mcheck = verify_moments(meas, mu_t, 2 * t, tol=value_tol)
    vals = np.array([evaluate(f, x) for x in meas.points])
    gap = float(np.max(np.abs(vals - rho))) if len(vals) else np.inf
    meas.residuals.update({"moment residual": mcheck.residual, "objective gap": gap})
    if not support.passed:
        raise RecoveryFailed(f"recovered atoms violate constraints (min margin {support.min_margin:.2e})")
    if not mcheck.passed:
        raise RecoveryFailed(f"recovered atoms do not match moments (residual {mcheck.residual:.2e})")
    if gap > value_tol * (1.0 + abs(rho)):
        raise RecoveryFailed(f"atoms are not minimizers: |f(x) - rho| = {gap:.2e}")
    return Recovery(meas, steps, t)


def riesz_value(phi: MomentSequence, f: Polynomial) -> float:
    idx = monomial_index(phi.nvars, phi.degree)
    return float(sum(c * phi.values[idx[e]] for e, c in f.items()))


def unconstrained_minimizers(phi: MomentSequence, f: Polynomial, rho: float | None = None,
                             x0_tol: float | None = None, tol: float = 1e-6,
                             value_tol: float = 1e-5, seed: int = 0) -> Recovery:
    """Global minimizers of ``f`` from an optimal ``phi`` of its single relaxation.

    Homogenize, extract atoms in ``R^(d+1)``, keep those with ``x0 != 0``,
    dehomogenize and keep the atoms with ``f(x) <= rho + value_tol * (1 + |rho|)``.
    """
    n = phi.order
    rho = riesz_value(phi, f) if rho is None else rho
    mu_t = extract_homogeneous_atoms(phi, tol=tol, seed=seed)
    deh = dehomogenize(mu_t, n, x0_tol)
    meas = deh.measure
    vals = np.array([evaluate(f, x) for x in meas.points])
    good = vals <= rho + value_tol * (1.0 + abs(rho))
    if not good.any():
        raise ExtractionFailed("no dehomogenized atom attains the relaxation value")
    out = AtomicMeasure(meas.points[good], meas.weights[good], provenance=meas.provenance)
    out.residuals = {
        **mu_t.residuals,
        "discarded mass (x0 = 0)": deh.discarded_mass,
        "discarded mass (f > rho)": float(meas.weights[~good].sum()),
        f"moments<= {2 * n - 1}": verify_moments(meas, phi, 2 * n - 1).residual,
        "objective gap": float(np.max(np.abs(vals[good] - rho))),
    }
    steps = [(n, len(mu_t), deh.discarded, "homogeneous")]
    return Recovery(out, steps, n)
