"""Sparse multivariate polynomials, graded-lex monomial bases and problem data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

Exponent = tuple  # tuple[int, ...]


def _monomials_of_degree(d: int, t: int):
    # descending lex inside a fixed total degree: (2,0), (1,1), (0,2)
    if d == 1:
        yield (t,)
        return
    for first in range(t, -1, -1):
        for rest in _monomials_of_degree(d - 1, t - first):
            yield (first,) + rest


@lru_cache(maxsize=None)
def monomial_basis(d: int, k: int) -> tuple:
    """All exponents of total degree at most ``k`` in ``d`` variables.

    Ordered by total degree first, then lexicographically with ``x1`` the
    largest variable, so ``monomial_basis(2, 1) == ((0, 0), (1, 0), (0, 1))``.
    The returned tuple has ``comb(k + d, d)`` entries and each basis is a
    prefix of the next one.
    """
    if d < 1:
        raise ValueError(f"need at least one variable, got d={d}")
    if k < 0:
        raise ValueError(f"degree bound must be non-negative, got k={k}")
    out = []
    for t in range(k + 1):
        out.extend(_monomials_of_degree(d, t))
    return tuple(out)


@lru_cache(maxsize=None)
def monomial_index(d: int, k: int) -> dict:
    """Map exponent -> position in ``monomial_basis(d, k)``."""
    return {a: i for i, a in enumerate(monomial_basis(d, k))}


def basis_size(d: int, k: int) -> int:
    return math.comb(k + d, d)


def _add(a: Exponent, b: Exponent) -> Exponent:
    return tuple(x + y for x, y in zip(a, b))


class Polynomial:
    """Real polynomial stored as ``{exponent tuple: coefficient}``.

    Zero coefficients are never stored.  Instances are treated as immutable.
    """

    __slots__ = ("nvars", "_terms")

    def __init__(self, nvars: int, terms: Mapping | Iterable = ()):
        if nvars < 1:
            raise ValueError(f"nvars must be positive, got {nvars}")
        self.nvars = int(nvars)
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict = {}
        for exp, coef in items:
            exp = tuple(int(e) for e in exp)
            if len(exp) != self.nvars:
                raise ValueError(
                    f"exponent {exp} has length {len(exp)}, expected {self.nvars}"
                )
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            coef = float(coef)
            if not math.isfinite(coef):
                raise ValueError(f"non-finite coefficient {coef} for {exp}")
            acc[exp] = acc.get(exp, 0.0) + coef
        self._terms = {e: c for e, c in acc.items() if c != 0.0}

    # constructors
    @classmethod
    def constant(cls, nvars: int, value: float) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, i: int, nvars: int) -> "Polynomial":
        """The coordinate polynomial ``x_{i+1}`` (0-based ``i``)."""
        exp = [0] * nvars
        exp[i] = 1
        return cls(nvars, {tuple(exp): 1.0})

    @classmethod
    def variables(cls, nvars: int) -> list:
        return [cls.variable(i, nvars) for i in range(nvars)]

    @classmethod
    def from_vector(cls, nvars: int, coeffs: Sequence[float]) -> "Polynomial":
        """Build from a coefficient vector laid out along ``monomial_basis``."""
        coeffs = np.asarray(coeffs, dtype=float)
        k = 0
        while basis_size(nvars, k) < len(coeffs):
            k += 1
        if basis_size(nvars, k) != len(coeffs):
            raise ValueError(f"{len(coeffs)} is not a basis size for d={nvars}")
        return cls(nvars, zip(monomial_basis(nvars, k), coeffs))

    # accessors
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self._terms}) <= 1

    def coefficient(self, exp) -> float:
        return self._terms.get(tuple(exp), 0.0)

    def coefficients(self, k: int | None = None) -> np.ndarray:
        """Dense coefficient vector on ``monomial_basis(nvars, k)``."""
        k = self.degree if k is None else k
        if self.degree > k:
            raise ValueError(f"degree {self.degree} exceeds basis degree {k}")
        idx = monomial_index(self.nvars, k)
        out = np.zeros(len(idx))
        for e, c in self._terms.items():
            out[idx[e]] = c
        return out

    def homogeneous_part(self, t: int) -> "Polynomial":
        return Polynomial(self.nvars, {e: c for e, c in self._terms.items() if sum(e) == t})

    # evaluation
    def __call__(self, x) -> float:
        return evaluate(self, x)

    # arithmetic
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError(f"variable count mismatch: {self.nvars} vs {other.nvars}")
            return other
        if isinstance(other, (int, float, np.integer, np.floating)):
            return Polynomial.constant(self.nvars, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Polynomial(self.nvars, list(self._terms.items()) + list(other._terms.items()))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        prod = [(_add(a, b), ca * cb) for a, ca in self._terms.items() for b, cb in other._terms.items()]
        return Polynomial(self.nvars, prod)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = Polynomial.constant(self.nvars, 1.0)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self._terms.items())))

    def allclose(self, other: "Polynomial", atol: float = 1e-12) -> bool:
        diff = self - other
        return all(abs(c) <= atol for _, c in diff.items())

    def diff(self, i: int) -> "Polynomial":
        """Partial derivative with respect to ``x_{i+1}``."""
        out = []
        for e, c in self._terms.items():
            if e[i]:
                ne = list(e)
                ne[i] -= 1
                out.append((tuple(ne), c * e[i]))
        return Polynomial(self.nvars, out)

    def gradient(self) -> list:
        return [self.diff(i) for i in range(self.nvars)]

    def scale_variables(self, factors) -> "Polynomial":
        """Return ``x -> p(factors * x)`` (coordinate-wise rescaling)."""
        factors = np.broadcast_to(np.asarray(factors, dtype=float), (self.nvars,))
        return Polynomial(
            self.nvars,
            {e: c * float(np.prod(factors ** np.array(e))) for e, c in self._terms.items()},
        )

    def __repr__(self):
        if not self._terms:
            return f"Polynomial({self.nvars}, 0)"
        return f"Polynomial({self.nvars}, {to_string(self)!r})"


def to_string(p: Polynomial, names: Sequence[str] | None = None) -> str:
    names = names or [f"x{i + 1}" for i in range(p.nvars)]
    order = monomial_index(p.nvars, p.degree)
    parts = []
    for e in sorted(p.items(), key=lambda t: order[t[0]]):
        exp, c = e
        mono = "*".join(
            n if k == 1 else f"{n}^{k}" for n, k in zip(names, exp) if k
        )
        if not mono:
            parts.append(f"{c:+g}")
        elif c == 1.0:
            parts.append(f"+{mono}")
        elif c == -1.0:
            parts.append(f"-{mono}")
        else:
            parts.append(f"{c:+g}*{mono}")
    s = " ".join(parts)
    return s[1:] if s.startswith("+") else s


def evaluate(p: Polynomial, x) -> float:
    """Value of ``p`` at the point ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (p.nvars,):
        raise ValueError(f"point has shape {x.shape}, polynomial has {p.nvars} variables")
    if p.is_zero():
        return 0.0
    exps = np.array(list(p._terms.keys()))
    coefs = np.array(list(p._terms.values()))
    return float(coefs @ np.prod(x ** exps, axis=1))


def evaluate_many(p: Polynomial, X) -> np.ndarray:
    """Vectorised evaluation at the rows of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != p.nvars:
        raise ValueError(f"expected an (N, {p.nvars}) array, got {X.shape}")
    if p.is_zero():
        return np.zeros(len(X))
    exps = np.array(list(p._terms.keys()))
    coefs = np.array(list(p._terms.values()))
    return np.prod(X[:, None, :] ** exps[None, :, :], axis=2) @ coefs


def monomial_vector(x, k: int) -> np.ndarray:
    """``v_k(x)``: all monomials of degree <= k evaluated at ``x``."""
    x = np.asarray(x, dtype=float)
    exps = np.array(monomial_basis(len(x), k))
    return np.prod(x[None, :] ** exps, axis=1)


def homogenize_poly(f: Polynomial, n: int) -> Polynomial:
    """Degree-``2n`` homogenization in ``(x0, x)``.

    ``f_a x^a`` becomes ``f_a x0^(2n-|a|) x^a``; the new variable ``x0`` is
    placed first.
    """
    if f.degree > 2 * n:
        raise ValueError(f"deg(f) = {f.degree} exceeds 2n = {2 * n}")
    return Polynomial(f.nvars + 1, {(2 * n - sum(e),) + e: c for e, c in f.items()})


def dehomogenize_poly(F: Polynomial) -> Polynomial:
    """Set the first variable of ``F`` to one."""
    if F.nvars < 2:
        raise ValueError("need at least two variables to dehomogenize")
    return Polynomial(F.nvars - 1, [(e[1:], c) for e, c in F.items()])


def half_degree(p: Polynomial) -> int:
    return (p.degree + 1) // 2


@dataclass(frozen=True)
class Pop:
    """Minimize ``objective`` subject to ``g(x) >= 0`` for every constraint."""

    objective: Polynomial
    constraints: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for g in self.constraints:
            if g.nvars != self.objective.nvars:
                raise ValueError(
                    f"constraint has {g.nvars} variables, objective has {self.objective.nvars}"
                )

    @property
    def nvars(self) -> int:
        return self.objective.nvars

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def is_unconstrained(self) -> bool:
        return not self.constraints

    @property
    def d_f(self) -> int:
        return half_degree(self.objective)

    @property
    def d_j(self) -> list:
        return [half_degree(g) for g in self.constraints]

    @property
    def v(self) -> int:
        # constant constraints give d_j = 0; the rank threshold is only meaningful for v >= 1
        return max([1] + self.d_j)

    @property
    def is_qcqp(self) -> bool:
        return self.objective.degree <= 2 and all(g.degree <= 2 for g in self.constraints)

    def min_order(self) -> int:
        return max(self.v, self.d_f) if self.constraints else max(1, self.d_f)

    def is_feasible(self, x, tol: float = 0.0) -> bool:
        return all(g(x) >= -tol for g in self.constraints)
