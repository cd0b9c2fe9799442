"""Problem files: JSON description of a polynomial optimization problem.

A problem file looks like::

    {
      "variables": ["x1", "x2"],
      "objective": [{"exponents": [2, 0], "coefficient": 1.0},
                    {"exponents": [0, 2], "coefficient": 1.0}],
      "constraints": [[{"exponents": [1, 0], "coefficient": 1.0},
                       {"exponents": [0, 1], "coefficient": 1.0},
                       {"exponents": [0, 0], "coefficient": -1.0}]],
      "oracle": {"box": [[-5, 5], [-5, 5]]}
    }

Each constraint means ``g(x) >= 0``.  ``variables`` may also be a count.
As a convenience, the objective and each constraint may be a string in a
restricted infix syntax (``"x1^2 + 2*x1*x2 - 3"``): numbers, variable names,
``+ - * ^`` (or ``**``) with nonnegative integer exponents, and parentheses.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .poly import Polynomial, Pop


class ProblemError(ValueError):
    """Malformed problem file; the message names the offending location."""


@dataclass(frozen=True)
class ProblemFile:
    variables: tuple
    pop: Pop
    box: tuple | None = None
    name: str = ""
    source: dict = field(default_factory=dict, compare=False)

    @property
    def nvars(self) -> int:
        return len(self.variables)

    def to_dict(self) -> dict:
        """Canonical exponent-list form (strings are expanded)."""
        out = {
            "variables": list(self.variables),
            "objective": terms_of(self.pop.objective),
            "constraints": [terms_of(g) for g in self.pop.constraints],
        }
        if self.name:
            out["name"] = self.name
        if self.box is not None:
            out["oracle"] = {"box": [list(b) for b in self.box]}
        return out


def terms_of(p: Polynomial) -> list:
    return [{"exponents": list(e), "coefficient": float(c)} for e, c in sorted(p.items(), key=_order)]


def _order(item):
    e = item[0]
    return (sum(e), tuple(-a for a in e))


# ---------------------------------------------------------------------------
# infix helper

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\*\*|[-+*^()]))")


def _tokenize(text: str, where: str):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ProblemError(f"{where}: unexpected character {text[pos:].lstrip()[:1]!r} at column {pos + 1}")
        num, name, op = m.groups()
        col = m.start() + len(m.group(0)) - len(m.group(0).lstrip()) + 1
        if num is not None:
            out.append(("num", float(num), col))
        elif name is not None:
            out.append(("name", name, col))
        else:
            out.append(("op", "^" if op == "**" else op, col))
        pos = m.end()
    out.append(("end", None, len(text) + 1))
    return out


class _Parser:
    """Recursive descent: expr := term (('+'|'-') term)*, term := unary ('*' unary)*,
    unary := '-' unary | power, power := atom ('^' int)?"""

    def __init__(self, text: str, names: list, where: str):
        self.toks = _tokenize(text, where)
        self.i = 0
        self.names = {n: k for k, n in enumerate(names)}
        self.d = len(names)
        self.where = where

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise ProblemError(f"{self.where}: {msg} at column {tok[2]}")

    def parse(self) -> Polynomial:
        p = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return p

    def expr(self):
        p = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self):
        p = self.unary()
        while self.peek()[:2] == ("op", "*"):
            self.take()
            p = p * self.unary()
        return p

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return -self.unary()
        if self.peek()[:2] == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            tok = self.take()
            if tok[0] != "num" or tok[1] != int(tok[1]):
                self.fail("exponent must be a nonnegative integer", tok)
            base = base ** int(tok[1])
        return base

    def atom(self):
        tok = self.take()
        kind, val, _ = tok
        if kind == "num":
            return Polynomial.constant(self.d, val)
        if kind == "name":
            if val not in self.names:
                self.fail(f"unknown variable {val!r}", tok)
            return Polynomial.variable(self.names[val], self.d)
        if tok[:2] == ("op", "("):
            p = self.expr()
            if self.take()[:2] != ("op", ")"):
                self.fail("expected ')'", self.toks[self.i - 1])
            return p
        self.fail(f"unexpected {val!r}" if val is not None else "unexpected end of expression", tok)


def parse_infix(text: str, names, where: str = "expression") -> Polynomial:
    """Polynomial from a restricted infix string over the given variable names."""
    return _Parser(text, list(names), where).parse()


# ---------------------------------------------------------------------------
# JSON


def _parse_poly(obj, names, where) -> Polynomial:
    d = len(names)
    if isinstance(obj, str):
        return parse_infix(obj, names, where)
    if not isinstance(obj, list):
        raise ProblemError(f"{where}: expected a list of terms or an infix string")
    terms = {}
    for k, t in enumerate(obj):
        loc = f"{where}[{k}]"
        if not isinstance(t, dict) or "exponents" not in t or "coefficient" not in t:
            raise ProblemError(f"{loc}: each term needs 'exponents' and 'coefficient'")
        e, c = t["exponents"], t["coefficient"]
        if not isinstance(e, list) or not all(isinstance(a, int) and not isinstance(a, bool) for a in e):
            raise ProblemError(f"{loc}.exponents: expected a list of integers")
        if len(e) != d:
            raise ProblemError(f"{loc}.exponents: length {len(e)}, expected {d} (one per variable)")
        if any(a < 0 for a in e):
            raise ProblemError(f"{loc}.exponents: negative exponent")
        if not isinstance(c, (int, float)) or isinstance(c, bool) or not math.isfinite(c):
            raise ProblemError(f"{loc}.coefficient: expected a finite number")
        terms[tuple(e)] = terms.get(tuple(e), 0.0) + float(c)
    return Polynomial(d, terms)


def parse_problem(data: dict) -> ProblemFile:
    if not isinstance(data, dict):
        raise ProblemError("problem: expected a JSON object")
    if "variables" not in data:
        raise ProblemError("variables: missing")
    var = data["variables"]
    if isinstance(var, int) and not isinstance(var, bool):
        if var < 1:
            raise ProblemError("variables: need at least one variable")
        names = [f"x{i + 1}" for i in range(var)]
    elif isinstance(var, list) and var and all(isinstance(v, str) for v in var):
        names = list(var)
        if len(set(names)) != len(names):
            raise ProblemError("variables: duplicate names")
        for v in names:
            if not re.fullmatch(r"[A-Za-z_]\w*", v):
                raise ProblemError(f"variables: invalid name {v!r}")
    else:
        raise ProblemError("variables: expected a positive count or a list of names")
    if "objective" not in data:
        raise ProblemError("objective: missing")
    f = _parse_poly(data["objective"], names, "objective")
    cons = data.get("constraints", [])
    if not isinstance(cons, list):
        raise ProblemError("constraints: expected a list")
    gs = [_parse_poly(g, names, f"constraints[{j}]") for j, g in enumerate(cons)]
    for j, g in enumerate(gs):
        if g.is_zero():
            raise ProblemError(f"constraints[{j}]: zero polynomial")
    box = None
    orc = data.get("oracle")
    if orc is not None:
        if not isinstance(orc, dict):
            raise ProblemError("oracle: expected an object")
        if "box" in orc:
            b = orc["box"]
            ok = (isinstance(b, list) and len(b) == len(names)
                  and all(isinstance(iv, list) and len(iv) == 2 for iv in b))
            if not ok:
                raise ProblemError(f"oracle.box: expected {len(names)} intervals [lo, hi]")
            try:
                box = tuple((float(lo), float(hi)) for lo, hi in b)
            except (TypeError, ValueError):
                raise ProblemError("oracle.box: bounds must be numbers") from None
            if any(not (lo <= hi) for lo, hi in box):
                raise ProblemError("oracle.box: need lo <= hi in every interval")
    return ProblemFile(tuple(names), Pop(f, gs), box, str(data.get("name", "")), data)


def load_problem(path) -> ProblemFile:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_problem(data)
