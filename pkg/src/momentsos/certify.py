"""Numerical ranks and exactness certificates for solved relaxations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .extraction import (
    AtomicMeasure,
    ExtractionFailed,
    RecoveryFailed,
    extract_atoms,
    qcqp_recover,
    unconstrained_minimizers,
    verify_moments,
    verify_support,
)
from .moments import MomentSequence, moment_matrix, riesz
from .poly import Polynomial, Pop, evaluate
from .sdp import OPTIMAL, SolveResult

EXACT_BY_RANK = "ExactByRank"
EXACT_BY_FLATNESS = "ExactByFlatness"
UNCONSTRAINED_EXACT = "UnconstrainedExact"
INCONCLUSIVE = "Inconclusive"
EXACT_KINDS = (EXACT_BY_RANK, EXACT_BY_FLATNESS, UNCONSTRAINED_EXACT)


def numerical_rank(M, tol: float = 1e-6):
    """``(rank, singular values)`` with rank ``#{s_i > tol * s_max}``."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0, np.zeros(0)
    sv = np.linalg.svd(0.5 * (M + M.T), compute_uv=False)
    if sv[0] == 0.0:
        return 0, sv
    return int(np.sum(sv > tol * sv[0])), sv


@dataclass(frozen=True)
class RankReport:
    ranks: tuple  # rank of M_k for k = 0..n
    singular_values: tuple
    tol: float

    @property
    def order(self) -> int:
        return len(self.ranks) - 1

    def rank(self, k: int | None = None) -> int:
        return self.ranks[self.order if k is None else k]

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "ranks": list(self.ranks),
            "singular_values": [list(map(float, s)) for s in self.singular_values],
        }


def rank_report(phi: MomentSequence, n: int | None = None, tol: float = 1e-6) -> RankReport:
    n = phi.order if n is None else n
    ranks, svs = [], []
    for k in range(n + 1):
        r, sv = numerical_rank(moment_matrix(phi, k), tol)
        ranks.append(r)
        svs.append(tuple(sv))
    return RankReport(tuple(ranks), tuple(svs), tol)


def rank_bound_threshold(n: int, v: int) -> int:
    if n < v:
        raise ValueError(f"rank condition needs n >= v, got n={n} < v={v}")
    return n - v + 1


def unconstrained_rank_threshold(n: int) -> int:
    if n <= 1:
        raise ValueError(f"rank bound is defined for n >= 2, got n={n}")
    return 6 if n == 2 else 3 * n - 3


def rank_bound_holds(rank: int, n: int, v: int) -> bool:
    return rank <= rank_bound_threshold(n, v)


def flat_holds(rank_n: int, rank_low: int) -> bool:
    return rank_n == rank_low


def unconstrained_rank_holds(rank: int, n: int) -> bool:
    return rank <= unconstrained_rank_threshold(n)


def check_rank_bound(phi: MomentSequence, n: int, v: int, tol: float = 1e-6):
    """``(rank M_n <= n - v + 1, report)``."""
    rank_bound_threshold(n, v)
    rep = rank_report(phi, n, tol)
    return rank_bound_holds(rep.rank(n), n, v), rep


def check_flatness(phi: MomentSequence, n: int, gap: int, tol: float = 1e-6):
    """``(rank M_n == rank M_{n-gap}, report)``."""
    if gap < 1 or n < gap:
        raise ValueError(f"flatness needs n >= gap >= 1, got n={n}, gap={gap}")
    rep = rank_report(phi, n, tol)
    return flat_holds(rep.rank(n), rep.rank(n - gap)), rep


def check_unconstrained_rank(phi: MomentSequence, n: int, tol: float = 1e-6):
    """``(rank M_n <= 3n-3 (n >= 3) or <= 6 (n = 2), report)``."""
    unconstrained_rank_threshold(n)
    rep = rank_report(phi, n, tol)
    return unconstrained_rank_holds(rep.rank(n), n), rep


@dataclass
class CertifySettings:
    tol_rank: float = 1e-6
    tol_value: float = 1e-5
    seed: int = 0
    scale: float = 1.0  # ranks are computed on moments of x / scale


@dataclass
class Certificate:
    kind: str
    order: int
    value: float | None
    value_claim: str
    details: dict = field(default_factory=dict)
    ranks: RankReport | None = None
    measure: AtomicMeasure | None = None
    minimizers_verified: bool = False
    notes: list = field(default_factory=list)

    @property
    def exact(self) -> bool:
        return self.kind in EXACT_KINDS

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "order": self.order,
            "value": self.value,
            "value_claim": self.value_claim,
            "minimizers_verified": self.minimizers_verified,
            "details": self.details,
            "ranks": None if self.ranks is None else self.ranks.to_dict(),
            "measure": None if self.measure is None else self.measure.to_dict(),
            "notes": list(self.notes),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _scaled(phi: MomentSequence, scale: float) -> MomentSequence:
    if scale == 1.0:
        return phi
    degs = np.array([sum(e) for e in phi.exponents])
    return MomentSequence(phi.nvars, phi.degree, phi.values * scale ** (-degs.astype(float)))


def _quadratic_parts(f: Polynomial):
    d = f.nvars
    A = np.zeros((d, d))
    b = np.zeros(d)
    for e, c in f.items():
        nz = [i for i, a in enumerate(e) if a]
        if sum(e) == 2:
            if len(nz) == 1:
                A[nz[0], nz[0]] += c
            else:
                A[nz[0], nz[1]] += c / 2
                A[nz[1], nz[0]] += c / 2
        elif sum(e) == 1:
            b[nz[0]] += c
    return A, b, f.coefficient((0,) * d)


def _certify_quadratic(f: Polynomial, result: SolveResult, tol: float) -> Certificate:
    """Degree-2 objective without constraints: exact iff convex and bounded."""
    A, b, c = _quadratic_parts(f)
    w = np.linalg.eigvalsh(A)
    scale = max(1.0, np.max(np.abs(A)))
    x = -0.5 * np.linalg.lstsq(A, b, rcond=None)[0]
    bounded = w[0] >= -tol * scale and np.linalg.norm(2 * A @ x + b) <= tol * max(1.0, np.linalg.norm(b))
    details = {"test": "convex quadratic", "hessian_eigenvalues": (2 * w).tolist()}
    if not bounded:
        return Certificate(INCONCLUSIVE, 1, result.value if result.status == OPTIMAL else None,
                           "unbounded below", details, notes=["quadratic is not bounded below"])
    value = float(evaluate(f, x))
    mu = AtomicMeasure(x[None, :], [1.0], provenance="stationary point of convex quadratic")
    notes = []
    if result.status == OPTIMAL and abs(result.value - value) > 1e3 * tol * (1 + abs(value)):
        notes.append(f"solver value {result.value:.10g} differs from analytic {value:.10g}")
    if np.sum(w <= tol * scale) > 0:
        notes.append("Hessian is singular: the minimizer set is an affine subspace; one point shown")
    return Certificate(UNCONSTRAINED_EXACT, 1, value, "rho = f*", details, measure=mu,
                       minimizers_verified=True, notes=notes)


def _validate(mu: AtomicMeasure, P: Pop, phi: MomentSequence, rho: float, tol: float):
    """Reasons the measure fails as a minimizer certificate (empty when it passes)."""
    bad = []
    if P.m:
        sup = verify_support(mu, P, tol)
        if not sup.passed:
            bad.append(f"support margin {sup.min_margin:.2e}")
    vals = np.array([evaluate(P.objective, x) for x in mu.points])
    gap = float(np.max(np.abs(vals - rho)))
    mu.residuals["objective gap"] = gap
    if gap > tol * (1 + abs(rho)):
        bad.append(f"|f(x) - rho| = {gap:.2e}")
    return bad


def certify(P: Pop, n: int, result: SolveResult, settings: CertifySettings | None = None) -> Certificate:
    """Exactness certificate for the order-``n`` relaxation of ``P`` solved into ``result``.

    Constrained problems: rank bound ``n - v + 1`` first, then flatness with
    gap ``v``.  Unconstrained problems (single relaxation, ``deg f = 2n``):
    the rank bound ``3n - 3`` / ``6``, with the quadratic case decided by
    convexity.  Exact certificates trigger minimizer extraction; a failed
    extraction keeps the value claim and marks minimizers unverified.
    """
    s = settings or CertifySettings()
    f = P.objective
    deg = f.degree
    if P.is_unconstrained:
        if deg != 2 * n:
            raise ValueError(f"unconstrained certificate needs deg(f) = 2n, got deg(f)={deg}, n={n}")
        if n == 1:
            return _certify_quadratic(f, result, s.tol_rank)
    else:
        if n < P.v:
            raise ValueError(f"violated n >= v: n={n}, v={P.v}")
        if deg > 2 * n:
            raise ValueError(f"violated 2n-1 >= deg(f): n={n}, deg(f)={deg}")

    if result.status != OPTIMAL or result.moments is None:
        claim = "no finite bound" if result.status != "infeasible" else "relaxation infeasible"
        return Certificate(INCONCLUSIVE, n, None, claim,
                           {"solver_status": result.status, "message": result.message},
                           notes=["relaxation has no optimal pseudo-moment sequence"])

    phi = result.moments
    rho = float(result.value)
    rep = rank_report(_scaled(phi, s.scale), n, s.tol_rank)
    rank_n = rep.rank(n)
    details = {"solver_status": result.status, "rank": rank_n}

    if P.is_unconstrained:
        bound = unconstrained_rank_threshold(n)
        details.update(test="rank <= 3n-3 (n>=3) or 6 (n=2)", threshold=bound,
                       fired=f"{rank_n} <= {bound}" if rank_n <= bound else None)
        if not unconstrained_rank_holds(rank_n, n):
            return Certificate(INCONCLUSIVE, n, rho, "lower bound only", details, rep,
                               notes=[f"rank {rank_n} > {bound}"])
        cert = Certificate(UNCONSTRAINED_EXACT, n, rho, "rho = f*", details, rep)
        try:
            rec = unconstrained_minimizers(phi, f, rho, tol=s.tol_rank, value_tol=s.tol_value, seed=s.seed)
            cert.measure = rec.measure
            cert.minimizers_verified = True
            details["atoms"] = len(rec.measure)
        except (ExtractionFailed, ValueError) as exc:
            cert.value_claim = "rho = f* (value exact, minimizers unverified)"
            cert.notes.append(f"extraction failed: {exc}")
        return cert

    v = P.v
    bound = rank_bound_threshold(n, v)
    flat = flat_holds(rep.rank(n), rep.rank(n - v))
    details.update(v=v, rank_threshold=bound, flat_gap=v, rank_low=rep.rank(n - v))
    if rank_bound_holds(rank_n, n, v):
        kind = EXACT_BY_RANK
        details.update(test="rank <= n-v+1", fired=f"{rank_n} <= {bound}")
    elif flat:
        kind = EXACT_BY_FLATNESS
        details.update(test="rank M_n = rank M_(n-v)", fired=f"{rank_n} == {rep.rank(n - v)}")
    else:
        details.update(test=None, fired=None)
        return Certificate(INCONCLUSIVE, n, rho, "lower bound only", details, rep,
                           notes=[f"rank {rank_n} > {bound} and rank M_{n - v} = {rep.rank(n - v)}"])

    cert = Certificate(kind, n, rho, "rho_n = f*", details, rep)
    # the rank theorem represents degrees <= 2n-1; objectives of degree 2n
    # need the whole sequence to be represented (r = s)
    needs_full = kind == EXACT_BY_RANK and deg == 2 * n
    try:
        if P.is_qcqp:
            rec = qcqp_recover(phi, P, n, rho, tol=s.tol_rank, value_tol=s.tol_value, seed=s.seed)
            mu = rec.measure
            details["recovery_steps"] = [list(st) for st in rec.steps]
        else:
            mu = extract_atoms(phi, tol=s.tol_rank, seed=s.seed,
                               fit_degree=2 * n if kind == EXACT_BY_FLATNESS else 2 * n - 1)
        bad = _validate(mu, P, phi, rho, s.tol_value)
        if bad:
            raise ExtractionFailed("; ".join(bad))
    except (ExtractionFailed, RecoveryFailed) as exc:
        if needs_full:
            cert.kind = INCONCLUSIVE
            cert.value_claim = "lower bound only"
            cert.notes.append(f"deg(f) = 2n and the full sequence could not be represented: {exc}")
        else:
            cert.value_claim = "rho_n = f* (value exact, minimizers unverified)"
            cert.notes.append(f"extraction failed: {exc}")
        return cert

    full = verify_moments(mu, phi, 2 * n, tol=s.tol_value)
    part = verify_moments(mu, phi, 2 * n - 1, tol=s.tol_value)
    details.update(atoms_r=len(mu), rank_s=rank_n, represented_degree=2 * n if full.passed else 2 * n - 1,
                   moment_residual_full=full.residual, moment_residual_truncated=part.residual)
    if needs_full and not full.passed:
        cert.kind = INCONCLUSIVE
        cert.value_claim = "lower bound only"
        cert.notes.append("deg(f) = 2n but the atoms only represent degrees <= 2n-1")
        return cert
    if len(mu) != rank_n:
        cert.notes.append(f"{len(mu)} atoms for rank {rank_n}: representation claimed up to degree "
                          f"{details['represented_degree']}")
    cert.measure = mu
    cert.minimizers_verified = True
    return cert


def certificate_value_gap(cert: Certificate, phi: MomentSequence, f: Polynomial) -> float:
    """``riesz(phi, f) - sum_i lam_i f(x(i))`` for an attached measure."""
    if cert.measure is None:
        raise ValueError("certificate has no measure")
    mu = cert.measure
    return riesz(phi, f) - float(sum(w * evaluate(f, x) for x, w in zip(mu.points, mu.weights)))


__all__ = [
    "numerical_rank", "RankReport", "rank_report", "check_rank_bound", "check_flatness",
    "check_unconstrained_rank", "rank_bound_holds", "flat_holds", "unconstrained_rank_holds",
    "Certificate", "CertifySettings", "certify",
]
