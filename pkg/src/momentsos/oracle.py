"""Brute-force ground truth for small problems: grid search and multistart local solves.

This is desk-scale calibration, not certified global optimization: every
result is restricted to a user box (default ``[-5, 5]^d``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .poly import Polynomial, Pop, evaluate_many

DEFAULT_BOX = (-5.0, 5.0)
FEAS_TOL = 1e-9
MAX_GRID_DIM = 4


@dataclass
class OracleResult:
    value: float
    points: np.ndarray  # (k, d), distinct within cluster_tol
    box: np.ndarray  # (d, 2)
    method: str
    resolution: int | None = None
    value_tol: float = 1e-8  # every listed point attains value within this
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "value": float(self.value),
            "points": np.asarray(self.points).tolist(),
            "box": np.asarray(self.box).tolist(),
            "method": self.method,
            "resolution": self.resolution,
            "value_tol": self.value_tol,
            "notes": list(self.notes),
        }


def _box(P: Pop, box) -> np.ndarray:
    d = P.nvars
    if box is None:
        box = [DEFAULT_BOX] * d
    box = np.asarray(box, dtype=float)
    if box.shape == (2,):
        box = np.tile(box, (d, 1))
    if box.shape != (d, 2) or np.any(box[:, 0] > box[:, 1]):
        raise ValueError(f"box must be {d} intervals (lo, hi) with lo <= hi")
    return box


def _cluster(points, tol=1e-4):
    """Greedy clustering; keeps the first representative, output sorted lexicographically."""
    reps = []
    for p in points:
        if all(np.max(np.abs(p - q)) > tol for q in reps):
            reps.append(p)
    reps = sorted(reps, key=lambda p: tuple(np.round(p, 8)))
    return np.array(reps).reshape(len(reps), -1)


def _feasible(P: Pop, X, tol=FEAS_TOL):
    ok = np.ones(len(X), dtype=bool)
    for g in P.constraints:
        ok &= evaluate_many(g, X) >= -tol
    return ok


def grid_min(P: Pop, box=None, resolution: int = 101, chunk: int = 200_000) -> OracleResult:
    """Minimum of ``f`` over the feasible points of a uniform grid."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    d = P.nvars
    if d > MAX_GRID_DIM:
        raise ValueError(f"grid search is limited to d <= {MAX_GRID_DIM}, got d={d}")
    box = _box(P, box)
    axes = [np.linspace(lo, hi, resolution) for lo, hi in box]
    total = resolution ** d
    best = np.inf
    cand, cand_vals = [], []
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        X = np.stack([axes[k][i] for k, i in enumerate(np.unravel_index(flat, (resolution,) * d))], axis=1)
        X = X[_feasible(P, X)]
        if not len(X):
            continue
        vals = evaluate_many(P.objective, X)
        best = min(best, vals.min())
        near = vals <= best + 1e-6
        cand.append(X[near])
        cand_vals.append(vals[near])
    if not np.isfinite(best):
        raise ValueError("no feasible grid point")
    X, vals = np.vstack(cand), np.concatenate(cand_vals)
    return OracleResult(float(best), _cluster(X[vals <= best + 1e-6]), box, "grid", resolution, 1e-6,
                        ["restricted to the box; grid spacing limits accuracy"])


def _hessian(f: Polynomial):
    grad = f.gradient()
    return grad, [[gi.diff(j) for j in range(f.nvars)] for gi in grad]


def _polish_unconstrained(f, grad, hess, x, steps=20):
    for _ in range(steps):
        g = np.array([gi(x) for gi in grad])
        if np.linalg.norm(g) <= 1e-12:
            break
        H = np.array([[h(x) for h in row] for row in hess])
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        x_new = x - step
        if f(x_new) > f(x) + 1e-12 * (1 + abs(f(x))):
            break
        x = x_new
    return x


def multistart_local(P: Pop, seeds: int = 32, box=None, seed: int = 0, starts=None) -> OracleResult:
    """Local solves from seeded uniform starts in the box (plus optional given starts)."""
    if seeds < 1:
        raise ValueError("seeds must be at least 1")
    box = _box(P, box)
    rng = np.random.default_rng(seed)
    X0 = rng.uniform(box[:, 0], box[:, 1], size=(seeds, P.nvars))
    if starts is not None and len(starts):
        X0 = np.vstack([np.atleast_2d(starts), X0])
    f = P.objective
    grad, hess = _hessian(f)
    fun = lambda x: f(x)
    jac = lambda x: np.array([gi(x) for gi in grad])
    cons = [
        {"type": "ineq", "fun": (lambda x, g=g: g(x)),
         "jac": (lambda x, gg=g.gradient(): np.array([gi(x) for gi in gg]))}
        for g in P.constraints
    ]
    found = []
    for x0 in X0:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # SLSQP clips steps to the bounds
            res = minimize(fun, x0, jac=jac, method="SLSQP", bounds=list(map(tuple, box)),
                           constraints=cons, options={"ftol": 1e-15, "maxiter": 500})
        x = np.clip(res.x, box[:, 0], box[:, 1])
        if P.is_unconstrained and np.all((x > box[:, 0]) & (x < box[:, 1])):
            x = _polish_unconstrained(f, grad, hess, x)
            if np.any(x < box[:, 0]) or np.any(x > box[:, 1]):
                continue
        if not P.is_feasible(x, 1e-8):
            continue
        found.append((f(x), tuple(x)))
    if not found:
        return OracleResult(np.inf, np.zeros((0, P.nvars)), box, "multistart", None, 1e-8,
                            ["no feasible local solution found"])
    found.sort()
    best = found[0][0]
    pts = [np.array(x) for v, x in found if v <= best + 1e-8]
    return OracleResult(float(best), _cluster(pts), box, "multistart", None, 1e-8,
                        [f"{len(X0)} starts", "restricted to the box"])


def oracle(P: Pop, box=None, resolution: int | None = None, seeds: int = 32, seed: int = 0) -> OracleResult:
    """Grid search (``d <= 4``) refined by local solves from the grid minimizers."""
    box = _box(P, box)
    starts = None
    grid = None
    if P.nvars <= MAX_GRID_DIM:
        res = resolution or {1: 2001, 2: 201, 3: 41, 4: 17}[P.nvars]
        try:
            grid = grid_min(P, box, res)
            starts = grid.points
        except ValueError:
            grid = None
    local = multistart_local(P, seeds, box, seed, starts)
    if grid is not None and grid.value < local.value - 1e-8:
        out = grid
    else:
        out = local
    out.notes = out.notes + ([f"grid value {grid.value:.10g} at resolution {grid.resolution}"] if grid else [])
    out.method = "grid+multistart" if grid is not None else "multistart"
    if grid is not None:
        out.resolution = grid.resolution
    return out
