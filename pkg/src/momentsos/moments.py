"""Pseudo-moment sequences, Riesz functional, moment and localizing matrices.

Every sequence is indexed along ``monomial_basis(d, degree)``; matrices are
indexed along ``monomial_basis(d, k)`` for the relevant sub-order ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .poly import Polynomial, basis_size, monomial_basis, monomial_index


@dataclass(frozen=True)
class MomentSequence:
    """Real vector ``(phi_a)`` for ``|a| <= degree``.

    ``degree`` is ``2n`` for the output of a relaxation of order ``n`` and
    ``2n - 1`` after :func:`truncate`.
    """

    nvars: int
    degree: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        expected = basis_size(self.nvars, self.degree)
        if vals.shape != (expected,):
            raise ValueError(
                f"moment vector has shape {vals.shape}, expected ({expected},) "
                f"for d={self.nvars}, degree={self.degree}"
            )

    @classmethod
    def of_order(cls, nvars: int, n: int, values) -> "MomentSequence":
        return cls(nvars, 2 * n, values)

    @property
    def order(self) -> int:
        """Largest ``k`` such that ``M_k`` can be formed."""
        return self.degree // 2

    @property
    def exponents(self) -> tuple:
        return monomial_basis(self.nvars, self.degree)

    def __getitem__(self, exp) -> float:
        return float(self.values[monomial_index(self.nvars, self.degree)[tuple(exp)]])

    def __len__(self):
        return len(self.values)

    def restrict(self, degree: int) -> "MomentSequence":
        """Keep the moments of degree at most ``degree``."""
        if degree > self.degree:
            raise ValueError(f"cannot restrict degree {self.degree} sequence to {degree}")
        return MomentSequence(self.nvars, degree, self.values[: basis_size(self.nvars, degree)])

    def first_moments(self) -> np.ndarray:
        """``(phi(x_1), ..., phi(x_d))``."""
        return np.array(self.values[1 : self.nvars + 1])


@lru_cache(maxsize=None)
def _shift_index(d: int, k: int, gamma: tuple, degree: int) -> np.ndarray:
    """Integer matrix whose (i, j) entry is the index of b_i + b_j + gamma."""
    basis = monomial_basis(d, k)
    idx = monomial_index(d, degree)
    out = np.empty((len(basis), len(basis)), dtype=np.intp)
    for i, a in enumerate(basis):
        for j in range(i, len(basis)):
            b = basis[j]
            out[i, j] = out[j, i] = idx[tuple(x + y + z for x, y, z in zip(a, b, gamma))]
    out.setflags(write=False)
    return out


def _symmetrize(M):
    return 0.5 * (M + M.T)


def riesz(phi: MomentSequence, p: Polynomial) -> float:
    """``phi(p) = sum_a p_a phi_a``."""
    if p.nvars != phi.nvars:
        raise ValueError(f"polynomial has {p.nvars} variables, sequence has {phi.nvars}")
    if p.degree > phi.degree:
        raise ValueError(f"deg(p) = {p.degree} exceeds moment degree {phi.degree}")
    idx = monomial_index(phi.nvars, phi.degree)
    return float(sum(c * phi.values[idx[e]] for e, c in p.items()))


def moment_matrix(phi: MomentSequence, k: int | None = None) -> np.ndarray:
    """``M_k(phi)`` with entry ``(a, b) = phi_{a+b}``."""
    k = phi.order if k is None else k
    if k < 0 or 2 * k > phi.degree:
        raise ValueError(f"moment matrix of order {k} needs degree {2 * k}, have {phi.degree}")
    I = _shift_index(phi.nvars, k, (0,) * phi.nvars, phi.degree)
    return phi.values[I]


def localizing_matrix(phi: MomentSequence, g: Polynomial, k: int) -> np.ndarray:
    """``M_k(g phi)`` with entry ``(a, b) = sum_c g_c phi_{a+b+c}``."""
    if g.nvars != phi.nvars:
        raise ValueError(f"polynomial has {g.nvars} variables, sequence has {phi.nvars}")
    if k < 0 or 2 * k + g.degree > phi.degree:
        raise ValueError(
            f"localizing matrix of order {k} with deg(g) = {g.degree} needs degree "
            f"{2 * k + g.degree}, have {phi.degree}"
        )
    s = basis_size(phi.nvars, k)
    M = np.zeros((s, s))
    for gamma, c in g.items():
        M += c * phi.values[_shift_index(phi.nvars, k, gamma, phi.degree)]
    return _symmetrize(M)


def basis_matrices(d: int, k: int, g: Polynomial | None = None) -> dict:
    """Coefficient matrices ``B^g_a`` with ``g v_k v_k^T = sum_a B^g_a x^a``.

    Only exponents with a nonzero matrix are present.  ``g=None`` means the
    constant polynomial one.
    """
    if g is None:
        g = Polynomial.constant(d, 1.0)
    if g.nvars != d:
        raise ValueError(f"polynomial has {g.nvars} variables, expected {d}")
    basis = monomial_basis(d, k)
    s = len(basis)
    out: dict = {}
    for gamma, c in g.items():
        for i, a in enumerate(basis):
            for j in range(s):
                e = tuple(x + y + z for x, y, z in zip(a, basis[j], gamma))
                B = out.get(e)
                if B is None:
                    B = out[e] = np.zeros((s, s))
                B[i, j] += c
    return {e: B for e, B in out.items() if np.any(B)}


def truncate(phi: MomentSequence) -> MomentSequence:
    """Drop the top-degree moments: ``phi^n -> (phi_a)_{|a| <= 2n-1}``."""
    if phi.degree < 1:
        raise ValueError("nothing to truncate in a degree-0 sequence")
    return phi.restrict(phi.degree - 1)


@dataclass(frozen=True)
class HomMomentSequence:
    """Homogenization of a degree-``2n`` sequence.

    Entries are indexed by pairs ``(i, a)`` with ``i + |a| = 2n``; ``values``
    follows the same order as the source sequence, i.e. position ``p`` holds
    the entry ``(2n - |a_p|, a_p)``.
    """

    nvars: int  # d + 1, counting x0
    total_degree: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def keys(self) -> list:
        d = self.nvars - 1
        return [(self.total_degree - sum(a),) + a for a in monomial_basis(d, self.total_degree)]

    def entry(self, i: int, a) -> float:
        a = tuple(a)
        if i + sum(a) != self.total_degree:
            raise KeyError(f"({i}, {a}) is not of total degree {self.total_degree}")
        return float(self.values[monomial_index(self.nvars - 1, self.total_degree)[a]])

    def __getitem__(self, key) -> float:
        key = tuple(key)
        return self.entry(key[0], key[1:])

    def as_dict(self) -> dict:
        return dict(zip(self.keys, self.values.tolist()))


def homogenize_sequence(phi: MomentSequence) -> HomMomentSequence:
    if phi.degree % 2:
        raise ValueError("homogenization needs an even-degree sequence")
    return HomMomentSequence(phi.nvars + 1, phi.degree, phi.values)


def dehomogenize_sequence(phit: HomMomentSequence) -> MomentSequence:
    return MomentSequence(phit.nvars - 1, phit.total_degree, phit.values)


def homogeneous_basis(d: int, n: int) -> list:
    """Degree-``n`` monomials in ``(x0, x)`` as ``(n - |a|, a)``, ``a`` along ``monomial_basis(d, n)``."""
    return [(n - sum(a),) + a for a in monomial_basis(d, n)]


def hom_moment_matrix(phit: HomMomentSequence) -> np.ndarray:
    """Moment matrix of ``phit`` on the degree-``n`` homogeneous basis.

    Entry ``((i, a), (j, b))`` is ``phit_{i+j, a+b}``.  This is built from the
    homogeneous indexing, independently of :func:`moment_matrix`.
    """
    if phit.total_degree % 2:
        raise ValueError("odd total degree has no moment matrix")
    n = phit.total_degree // 2
    d = phit.nvars - 1
    rows = homogeneous_basis(d, n)
    table = phit.as_dict()
    s = len(rows)
    M = np.empty((s, s))
    for p, u in enumerate(rows):
        for q, w in enumerate(rows):
            M[p, q] = table[tuple(x + y for x, y in zip(u, w))]
    return M


def moments_of_atoms(points, weights, n: int, allow_empty: bool = False,
                     degree: int | None = None) -> MomentSequence:
    """Moments ``phi_a = sum_i w_i x(i)^a`` for ``|a| <= 2n`` (or ``|a| <= degree``)."""
    degree = 2 * n if degree is None else degree
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if points.size == 0:
        if not allow_empty:
            raise ValueError("no atoms given")
        if points.ndim != 2:
            raise ValueError("empty point set needs shape (0, d) to fix the dimension")
        return MomentSequence(points.shape[1], degree, np.zeros(basis_size(points.shape[1], degree)))
    if points.ndim == 1:
        points = points[:, None]
    if weights.shape != (len(points),):
        raise ValueError(f"{len(weights)} weights for {len(points)} points")
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    d = points.shape[1]
    exps = np.array(monomial_basis(d, degree))
    V = np.prod(points[:, None, :] ** exps[None, :, :], axis=2)  # (r, N)
    return MomentSequence(d, degree, weights @ V)


def vandermonde(points, degree: int) -> np.ndarray:
    """Columns ``v_degree(x(i))`` for each point (shape ``(s(degree), r)``)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    exps = np.array(monomial_basis(points.shape[1], degree))
    return np.prod(points[None, :, :] ** exps[:, None, :], axis=2)
