"""Assemble moment relaxations as standard-form conic programs.

The decision vector of every program is the pseudo-moment vector ``y``
indexed along ``monomial_basis(d, 2n)``.  Each PSD block is the affine map
``y -> sum_a y_a B_a``; the only equality is ``y_0 = 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .moments import basis_matrices
from .poly import Polynomial, Pop, basis_size, monomial_basis, monomial_index

JSON_FORMAT = "momentsos.conic/1"


@dataclass(frozen=True)
class PsdBlock:
    """``sum_i y_i coeffs[i] >= 0`` where ``i`` indexes the moment vector."""

    name: str
    dim: int
    coeffs: dict  # moment index -> (dim, dim) symmetric array

    def evaluate(self, y) -> np.ndarray:
        M = np.zeros((self.dim, self.dim))
        for i, B in self.coeffs.items():
            M += y[i] * B
        return 0.5 * (M + M.T)

    def dense(self, nmom: int) -> np.ndarray:
        """Stacked coefficient array of shape ``(nmom, dim, dim)``."""
        out = np.zeros((nmom, self.dim, self.dim))
        for i, B in self.coeffs.items():
            out[i] = B
        return out


@dataclass(frozen=True)
class ConicProgram:
    """Minimize ``c @ y`` subject to ``y_0 = 1`` and every block PSD.

    ``sense`` records which side the caller is interested in: ``"moment"``
    (the pseudo-moment problem) or ``"sos"`` (its dual: maximize ``lam``
    such that ``f - lam`` has a Gram matrix).  Both describe the same primal
    dual pair; only reporting differs.  ``scale`` is the box radius used to
    rescale variables (``x = scale * u``); the program is written in ``u``.
    """

    nvars: int
    order: int
    objective: np.ndarray
    blocks: tuple
    sense: str = "moment"
    scale: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def num_moments(self) -> int:
        return len(self.objective)

    @property
    def exponents(self) -> tuple:
        return monomial_basis(self.nvars, 2 * self.order)

    @property
    def block_dims(self) -> list:
        return [b.dim for b in self.blocks]

    def block_values(self, y) -> list:
        return [b.evaluate(y) for b in self.blocks]

    def objective_value(self, y) -> float:
        return float(self.objective @ y)

    def unscale_moments(self, y) -> np.ndarray:
        """Moments in the original variables from moments of the scaled ones."""
        if self.scale == 1.0:
            return np.asarray(y, dtype=float).copy()
        degs = np.array([sum(e) for e in self.exponents])
        return np.asarray(y) * self.scale ** degs

    def scale_moments(self, y) -> np.ndarray:
        degs = np.array([sum(e) for e in self.exponents])
        return np.asarray(y) * self.scale ** (-degs)

    # JSON exchange -------------------------------------------------------
    def to_dict(self) -> dict:
        exps = self.exponents
        blocks = []
        for b in self.blocks:
            tril = np.tril_indices(b.dim)
            blocks.append(
                {
                    "name": b.name,
                    "dim": b.dim,
                    "terms": [
                        {"alpha": list(exps[i]), "packed_lower": b.coeffs[i][tril].tolist()}
                        for i in sorted(b.coeffs)
                    ],
                }
            )
        return {
            "format": JSON_FORMAT,
            "sense": self.sense,
            "nvars": self.nvars,
            "order": self.order,
            "scale": self.scale,
            "objective": [
                {"alpha": list(e), "coefficient": float(c)}
                for e, c in zip(exps, self.objective)
                if c != 0.0
            ],
            "equalities": [{"alpha": [0] * self.nvars, "value": 1.0}],
            "blocks": blocks,
            "meta": self.meta,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "ConicProgram":
        if data.get("format") != JSON_FORMAT:
            raise ValueError(f"unknown program format {data.get('format')!r}")
        d, n = int(data["nvars"]), int(data["order"])
        idx = monomial_index(d, 2 * n)
        c = np.zeros(len(idx))
        for t in data["objective"]:
            c[idx[tuple(t["alpha"])]] = t["coefficient"]
        blocks = []
        for b in data["blocks"]:
            dim = int(b["dim"])
            tril = np.tril_indices(dim)
            coeffs = {}
            for t in b["terms"]:
                B = np.zeros((dim, dim))
                B[tril] = t["packed_lower"]
                B = B + np.tril(B, -1).T
                coeffs[idx[tuple(t["alpha"])]] = B
            blocks.append(PsdBlock(b["name"], dim, coeffs))
        return cls(d, n, c, tuple(blocks), data.get("sense", "moment"),
                   float(data.get("scale", 1.0)), dict(data.get("meta", {})))

    @classmethod
    def from_json(cls, text: str) -> "ConicProgram":
        return cls.from_dict(json.loads(text))


def _block(d: int, n: int, k: int, g: Polynomial | None, name: str) -> PsdBlock:
    idx = monomial_index(d, 2 * n)
    coeffs = {idx[e]: B for e, B in basis_matrices(d, k, g).items()}
    return PsdBlock(name, basis_size(d, k), coeffs)


def build_Qn(P: Pop, n: int, scale: float = 1.0) -> ConicProgram:
    """Order-``n`` moment relaxation of ``P``.

    Block 0 is ``M_n(y)``; block ``j`` is ``M_{n-d_j}(g_j y)``.  With
    ``scale = R`` the program is written in ``u = x / R``.
    """
    need = P.min_order()
    if n < need:
        raise ValueError(
            f"relaxation order n={n} is too small: need n >= max(v, d_f) = {need}"
        )
    if scale <= 0:
        raise ValueError("scale must be positive")
    d = P.nvars
    f = P.objective.scale_variables(scale)
    gs = [g.scale_variables(scale) for g in P.constraints]
    blocks = [_block(d, n, n, None, "moment")]
    for j, (g, dj) in enumerate(zip(gs, P.d_j), start=1):
        blocks.append(_block(d, n, n - dj, g, f"localizing[{j}]"))
    return ConicProgram(
        d, n, f.coefficients(2 * n), tuple(blocks), "moment", float(scale),
        {"kind": "Qn", "v": P.v, "d_f": P.d_f, "d_j": P.d_j},
    )


def _check_even(f: Polynomial) -> int:
    deg = f.degree
    if deg % 2:
        raise ValueError(f"deg(f) = {deg} is odd: f is unbounded below")
    if deg < 2:
        raise ValueError("objective must have degree at least 2")
    return deg // 2


def build_unconstrained(f: Polynomial, scale: float = 1.0) -> ConicProgram:
    """The single relaxation ``min phi(f) : phi(1) = 1, M_n(phi) >= 0``, ``2n = deg f``."""
    n = _check_even(f)
    prog = build_Qn(Pop(f), n, scale)
    return ConicProgram(prog.nvars, n, prog.objective, prog.blocks, "moment", prog.scale,
                        {"kind": "unconstrained", "v": None, "d_f": n, "d_j": []})


def build_unconstrained_dual(f: Polynomial, scale: float = 1.0) -> ConicProgram:
    """SOS side: maximize ``lam`` with ``f - lam = v_n^T Q v_n``, ``Q >= 0``.

    Coefficient matching reads ``<B_a, Q> = f_a`` for ``a != 0`` and
    ``lam = f_0 - <B_0, Q>``, which is the conic dual of
    :func:`build_unconstrained`; the returned program shares its data and is
    flagged ``sense="sos"``.
    """
    prog = build_unconstrained(f, scale)
    return ConicProgram(prog.nvars, prog.order, prog.objective, prog.blocks, "sos",
                        prog.scale, {**prog.meta, "kind": "unconstrained_dual"})


def gram_residual(f: Polynomial, lam: float, Q, scale: float = 1.0) -> float:
    """Max coefficient mismatch of ``f - lam - v_n^T Q v_n`` (in scaled variables)."""
    n = _check_even(f)
    d = f.nvars
    target = (f.scale_variables(scale) - lam).coefficients(2 * n)
    idx = monomial_index(d, 2 * n)
    got = np.zeros_like(target)
    for e, B in basis_matrices(d, n).items():
        got[idx[e]] = np.sum(B * Q)
    return float(np.max(np.abs(got - target)))
