"""Dense primal-dual interior-point solver for moment programs.

A :class:`~momentsos.relaxation.ConicProgram` ``min c@y : y_0 = 1,
sum_i y_i A_i^(j) >= 0`` is put in the usual primal/dual pair

    (P)  min <C, X>      s.t.  <F_i, X> = b_i,  X >= 0
    (D)  max b @ z       s.t.  S = C - sum_i z_i F_i >= 0

with ``C = A_0``, ``F_i = A_i``, ``b_i = c_i`` and ``z_i = -y_i`` for
``i >= 1``.  (D) is the moment problem and ``rho = c_0 - b@z``; (P) is the
SOS side and ``lam = c_0 - <C, X>``.  The ``X`` blocks are the Gram /
multiplier matrices of the SOS certificate.

The method is an infeasible-start Mehrotra predictor-corrector using the
Nesterov-Todd scaling.  Iterates follow the central path, so on a
non-singleton optimal face the moment solution tends to the relative
interior (maximal rank), which is what the rank tests downstream expect.
"""

from __future__ import annotations

import json
import logging
import os
import shlex
import subprocess
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .moments import MomentSequence
from .relaxation import ConicProgram

log = logging.getLogger(__name__)

ADAPTER_ENV = "MOMENTSOS_ADAPTER"

OPTIMAL = "optimal"
UNBOUNDED = "unbounded_below"
INFEASIBLE = "infeasible"
TROUBLE = "numerical_trouble"
UNBOUNDED_ABOVE = "unbounded_above"  # SOS side, when the moment side is infeasible

_SOS_STATUS = {UNBOUNDED: INFEASIBLE, INFEASIBLE: UNBOUNDED_ABOVE}


@dataclass(frozen=True)
class SolverSettings:
    feas_tol: float = 1e-9
    gap_tol: float = 1e-9
    max_iter: int = 200
    backend: str = "bundled"  # "bundled", "adapter" (env var) or "adapter:/path/to/exe"
    objective_floor: float = -1e9
    infeas_tol: float = 1e-8
    step_fraction: float = 0.98

    def __post_init__(self):
        if self.feas_tol <= 0 or self.gap_tol <= 0 or self.infeas_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class SolveResult:
    """Outcome of one solve.

    ``value`` is the moment-side optimum ``rho`` for ``sense="moment"`` and
    the SOS-side optimum ``lam`` for ``sense="sos"``; both sides are always
    filled in (``moment_value`` / ``sos_value``).
    """

    status: str
    sense: str
    value: float
    moment_value: float
    sos_value: float
    moments: MomentSequence | None
    multipliers: list = field(default_factory=list)
    block_matrices: list = field(default_factory=list)
    complementarity: list = field(default_factory=list)
    min_eigenvalues: list = field(default_factory=list)
    primal_infeasibility: float = float("nan")
    dual_infeasibility: float = float("nan")
    relative_gap: float = float("nan")
    iterations: int = 0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "sense": self.sense,
            "value": _finite(self.value),
            "moment_value": _finite(self.moment_value),
            "sos_value": _finite(self.sos_value),
            "moments": None if self.moments is None else {
                "nvars": self.moments.nvars,
                "degree": self.moments.degree,
                "values": self.moments.values.tolist(),
            },
            "multipliers": [_packed(X) for X in self.multipliers],
            "complementarity": list(map(float, self.complementarity)),
            "min_eigenvalues": list(map(float, self.min_eigenvalues)),
            "primal_infeasibility": _finite(self.primal_infeasibility),
            "dual_infeasibility": _finite(self.dual_infeasibility),
            "relative_gap": _finite(self.relative_gap),
            "iterations": self.iterations,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, data: dict, prog: ConicProgram | None = None) -> "SolveResult":
        mom = data.get("moments")
        moments = None
        if mom is not None:
            moments = MomentSequence(int(mom["nvars"]), int(mom["degree"]), mom["values"])
        res = cls(
            status=data["status"],
            sense=data.get("sense", "moment"),
            value=_unfinite(data.get("value")),
            moment_value=_unfinite(data.get("moment_value", data.get("value"))),
            sos_value=_unfinite(data.get("sos_value")),
            moments=moments,
            multipliers=[_unpacked(p) for p in data.get("multipliers", [])],
            complementarity=list(data.get("complementarity", [])),
            min_eigenvalues=list(data.get("min_eigenvalues", [])),
            primal_infeasibility=_unfinite(data.get("primal_infeasibility")),
            dual_infeasibility=_unfinite(data.get("dual_infeasibility")),
            relative_gap=_unfinite(data.get("relative_gap")),
            iterations=int(data.get("iterations", 0)),
            message=data.get("message", ""),
        )
        if prog is not None and moments is not None:
            _attach_block_data(res, prog)
        return res


def _finite(x):
    if x is None:
        return None
    x = float(x)
    if np.isnan(x):
        return None
    if np.isinf(x):
        return "-inf" if x < 0 else "inf"
    return x


def _unfinite(x):
    if x is None:
        return float("nan")
    return float(x)


def _packed(X):
    X = np.asarray(X)
    return {"dim": X.shape[0], "packed_lower": X[np.tril_indices(X.shape[0])].tolist()}


def _unpacked(p):
    dim = int(p["dim"])
    X = np.zeros((dim, dim))
    X[np.tril_indices(dim)] = p["packed_lower"]
    return X + np.tril(X, -1).T


def _attach_block_data(res: SolveResult, prog: ConicProgram):
    y = prog.scale_moments(res.moments.values)
    res.block_matrices = prog.block_values(y)
    res.min_eigenvalues = [float(np.linalg.eigvalsh(M)[0]) for M in res.block_matrices]
    if res.multipliers and len(res.multipliers) == len(res.block_matrices):
        res.complementarity = [float(np.sum(M * X)) for M, X in zip(res.block_matrices, res.multipliers)]


# ---------------------------------------------------------------------------
# problem data in (P)/(D) form


class _Data:
    def __init__(self, prog: ConicProgram):
        N = prog.num_moments
        self.c0 = float(prog.objective[0])
        self.b = np.array(prog.objective[1:], dtype=float)
        self.dims = [blk.dim for blk in prog.blocks]
        self.C = []
        self.F = []  # per block: (N-1, s*s)
        for blk in prog.blocks:
            dense = blk.dense(N)
            self.C.append(dense[0])
            self.F.append(dense[1:].reshape(N - 1, -1))
        self.m = N - 1
        self.nt = sum(self.dims)

    def A(self, X):
        out = np.zeros(self.m)
        for Fj, Xj in zip(self.F, X):
            out += Fj @ Xj.ravel()
        return out

    def At(self, z):
        return [(z @ Fj).reshape(s, s) for Fj, s in zip(self.F, self.dims)]


def _sym(M):
    return 0.5 * (M + M.T)


def _inner(X, S):
    return float(sum(np.sum(a * b) for a, b in zip(X, S)))


def _fro(X):
    return float(np.sqrt(sum(np.sum(a * a) for a in X)))


def _max_step(L, D):
    """Largest t with L L^T + t D >= 0 (``inf`` when unbounded)."""
    Y = sla.solve_triangular(L, D, lower=True)
    Y = sla.solve_triangular(L, Y.T, lower=True)
    lmin = np.linalg.eigvalsh(_sym(Y))[0]
    return np.inf if lmin >= 0 else -1.0 / lmin


def _nt_scaling(X, S):
    L = np.linalg.cholesky(X)
    lam, U = np.linalg.eigh(_sym(L.T @ S @ L))
    lam = np.maximum(lam, 1e-300)
    # W = G G^T,  G^-1 X G^-T = G^T S G = diag(v)
    G = (L @ U) * lam ** -0.25
    Ginv = (lam[:, None] ** 0.25) * (U.T @ sla.solve_triangular(L, np.eye(len(L)), lower=True))
    v = np.sqrt(lam)
    return L, G, Ginv, v


def _solve_bundled(prog: ConicProgram, settings: SolverSettings) -> SolveResult:
    dat = _Data(prog)
    b, C = dat.b, dat.C
    normb = 1.0 + np.linalg.norm(b)
    normC = 1.0 + _fro(C)

    # starting point in the spirit of SDPT3
    X, S = [], []
    for j, s in enumerate(dat.dims):
        Fn = np.sqrt(np.sum(dat.F[j] ** 2, axis=1))
        xi = max(10.0, np.sqrt(s), np.sqrt(s) * np.max((1 + np.abs(b)) / (1 + Fn)))
        eta = max(10.0, np.sqrt(s), np.linalg.norm(C[j]), np.max(Fn, initial=0.0))
        X.append(xi * np.eye(s))
        S.append(eta * np.eye(s))
    z = np.zeros(dat.m)

    status, message = TROUBLE, "iteration limit reached"
    best = None
    it = 0
    for it in range(1, settings.max_iter + 1):
        rp = b - dat.A(X)
        AtZ = dat.At(z)
        Rd = [Cj - Aj - Sj for Cj, Aj, Sj in zip(C, AtZ, S)]
        mu = _inner(X, S) / dat.nt
        pobj = _inner(C, X)
        dobj = float(b @ z)
        pinf = np.linalg.norm(rp) / normb
        dinf = _fro(Rd) / normC
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        compl = _inner(X, S) / (1.0 + abs(pobj) + abs(dobj))
        score = max(pinf, dinf, gap, compl)
        if best is None or score < best[0]:
            best = (score, [x.copy() for x in X], z.copy(), [s_.copy() for s_ in S], pinf, dinf, gap)
        log.debug("it %3d pobj %.10e dobj %.10e pinf %.2e dinf %.2e gap %.2e mu %.2e",
                  it, pobj, dobj, pinf, dinf, gap, mu)

        if pinf <= settings.feas_tol and dinf <= settings.feas_tol and max(gap, compl) <= settings.gap_tol:
            status, message = OPTIMAL, "converged"
            break
        # moment side unbounded below <=> SOS side infeasible
        rho = dat.c0 - dobj
        if dobj > 0 and dinf <= 1e3 * settings.feas_tol * max(1.0, abs(dobj)) / normC and (
            rho < settings.objective_floor
            or _fro([Cj - Rj for Cj, Rj in zip(C, Rd)]) / dobj < settings.infeas_tol
        ):
            status, message = UNBOUNDED, "moment objective unbounded below (SOS side infeasible)"
            break
        # moment side infeasible <=> SOS side unbounded
        if pobj < 0 and np.linalg.norm(b - rp) / -pobj < settings.infeas_tol:
            status, message = INFEASIBLE, "moment relaxation infeasible"
            break

        try:
            scal = [_nt_scaling(Xj, Sj) for Xj, Sj in zip(X, S)]
        except np.linalg.LinAlgError:
            message = "lost positive definiteness"
            break
        W = [G @ G.T for _, G, _, _ in scal]

        # Schur complement  M_ik = <F_i, W F_k W>
        M = np.zeros((dat.m, dat.m))
        for Fj, Wj, s in zip(dat.F, W, dat.dims):
            Fm = Fj.reshape(-1, s, s)
            WFW = (Wj @ Fm @ Wj).reshape(dat.m, -1)
            M += Fj @ WFW.T
        M = _sym(M)
        try:
            cho = sla.cho_factor(M)
        except np.linalg.LinAlgError:
            reg = 1e-14 * max(1.0, np.max(np.abs(np.diag(M))))
            try:
                cho = sla.cho_factor(M + reg * np.eye(dat.m))
            except np.linalg.LinAlgError:
                message = "Schur complement not positive definite"
                break

        def direction(Rc):
            rhs = rp - dat.A(Rc) + dat.A([Wj @ R @ Wj for Wj, R in zip(W, Rd)])
            dz = sla.cho_solve(cho, rhs)
            AtdZ = dat.At(dz)
            dS = [_sym(R - A) for R, A in zip(Rd, AtdZ)]
            dX = [_sym(Rcj - Wj @ dSj @ Wj) for Rcj, Wj, dSj in zip(Rc, W, dS)]
            return dX, dz, dS

        def steps(dX, dS):
            ap = min([_max_step(sc[0], d) for sc, d in zip(scal, dX)] + [np.inf])
            Ls = [np.linalg.cholesky(Sj) for Sj in S]
            ad = min([_max_step(L, d) for L, d in zip(Ls, dS)] + [np.inf])
            return min(1.0, ap), min(1.0, ad), ap, ad

        # predictor
        dXa, dza, dSa = direction([-Xj for Xj in X])
        ap, ad, _, _ = steps(dXa, dSa)
        mu_aff = _inner([Xj + ap * d for Xj, d in zip(X, dXa)], [Sj + ad * d for Sj, d in zip(S, dSa)]) / dat.nt
        sigma = min(1.0, (mu_aff / mu) ** 3) if mu > 0 else 0.0

        # corrector: Lyapunov equation in the scaled space, V diagonal
        Rc = []
        for (L, G, Ginv, v), dX, dS in zip(scal, dXa, dSa):
            DX = Ginv @ dX @ Ginv.T
            DS = G.T @ dS @ G
            rhs = -(DX @ DS + DS @ DX)
            rhs[np.diag_indices_from(rhs)] += 2.0 * sigma * mu - 2.0 * v * v
            T = rhs / (v[:, None] + v[None, :])
            Rc.append(_sym(G @ T @ G.T))
        dX, dz, dS = direction(Rc)
        _, _, ap, ad = steps(dX, dS)
        gamma = settings.step_fraction
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        X = [_sym(Xj + ap * d) for Xj, d in zip(X, dX)]
        z = z + ad * dz
        S = [_sym(Sj + ad * d) for Sj, d in zip(S, dS)]
        if not np.all(np.isfinite(z)) or max(ap, ad) < 1e-12:
            message = "step length collapsed"
            break

    if status == TROUBLE and best is not None:
        _, X, z, S, pinf, dinf, gap = best

    y = np.concatenate([[1.0], -z])
    pobj = _inner(C, X)
    dobj = float(b @ z)
    rho, lam = dat.c0 - dobj, dat.c0 - pobj
    if status == UNBOUNDED:
        lam = -np.inf
    elif status == INFEASIBLE:
        rho = np.inf
    res = SolveResult(
        status=status if prog.sense == "moment" else _SOS_STATUS.get(status, status),
        sense=prog.sense,
        value=rho if prog.sense == "moment" else lam,
        moment_value=rho,
        sos_value=lam,
        moments=MomentSequence(prog.nvars, 2 * prog.order, prog.unscale_moments(y)),
        multipliers=X,
        primal_infeasibility=float(pinf),
        dual_infeasibility=float(dinf),
        relative_gap=float(gap),
        iterations=it,
        message=message,
    )
    _attach_block_data(res, prog)
    return res


def _solve_adapter(prog: ConicProgram, settings: SolverSettings, exe: str) -> SolveResult:
    payload = json.dumps({"program": prog.to_dict(), "settings": {
        "feas_tol": settings.feas_tol, "gap_tol": settings.gap_tol, "max_iter": settings.max_iter}})
    cmd = shlex.split(exe)
    proc = subprocess.run(cmd, input=payload, capture_output=True, text=True, check=False)
    if proc.returncode != 0:
        raise RuntimeError(f"adapter {exe!r} failed ({proc.returncode}): {proc.stderr.strip()}")
    data = json.loads(proc.stdout)
    res = SolveResult.from_dict(data, prog)
    res.sense = prog.sense
    return res


def solve(prog: ConicProgram, settings: SolverSettings | None = None) -> SolveResult:
    """Solve ``prog`` with the configured backend."""
    settings = settings or SolverSettings()
    backend = settings.backend
    if backend == "bundled":
        return _solve_bundled(prog, settings)
    if backend == "adapter" or backend.startswith("adapter:"):
        exe = backend.partition(":")[2] or os.environ.get(ADAPTER_ENV)
        if not exe:
            raise ValueError(f"no adapter executable: pass adapter:PATH or set {ADAPTER_ENV}")
        return _solve_adapter(prog, settings, exe)
    raise ValueError(f"unknown backend {backend!r}")
