"""Batch front end: problem file in, certified report out.

Exit codes: 0 when some order is certified exact, 2 when every solved order
is inconclusive, 1 on errors (bad input, solver failure).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .certify import CertifySettings, certify
from .oracle import oracle
from .problem import ProblemError, ProblemFile, load_problem, parse_problem
from .relaxation import build_Qn, build_unconstrained
from .sdp import SolverSettings, solve

REPORT_SCHEMA = "momentsos.report/1"
EXIT_EXACT, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2

log = logging.getLogger(__name__)


@dataclass
class RunOptions:
    order: int | None = None
    max_order: int | None = None
    all_orders: bool = False
    tol_rank: float = 1e-6
    tol_solve: float = 1e-9
    solver: str = "bundled"
    oracle: bool = True
    seed: int = 0
    scale_radius: float = 1.0
    extra_orders: int = 3  # orders tried past the first when max_order is unset

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "max_order": self.max_order,
            "all_orders": self.all_orders,
            "tol_rank": self.tol_rank,
            "tol_solve": self.tol_solve,
            "solver": self.solver,
            "oracle": self.oracle,
            "seed": self.seed,
            "scale_radius": self.scale_radius,
        }


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, arrays become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


@dataclass
class Report:
    problem: dict
    settings: dict
    orders: list = field(default_factory=list)
    oracle: dict | None = None
    outcome: dict = field(default_factory=dict)
    schema: str = REPORT_SCHEMA

    @property
    def exit_code(self) -> int:
        return int(self.outcome.get("exit_code", EXIT_ERROR))

    def to_dict(self) -> dict:
        return _clean({
            "schema": self.schema,
            "problem": self.problem,
            "settings": self.settings,
            "orders": self.orders,
            "oracle": self.oracle,
            "outcome": self.outcome,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        if data.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unknown report schema {data.get('schema')!r}")
        return cls(data["problem"], data["settings"], list(data["orders"]), data["oracle"],
                   dict(data["outcome"]), data["schema"])

    @classmethod
    def from_json(cls, text: str) -> "Report":
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        lines = [f"problem: {len(self.problem['variables'])} variables, "
                 f"{len(self.problem['constraints'])} constraints"]
        for o in self.orders:
            head = f"order {o['order']}: status {o['status']}"
            if o.get("value") is not None:
                head += f", rho = {o['value']}"
            lines.append(head)
            if o.get("error"):
                lines.append(f"  error: {o['error']}")
                continue
            cert = o["certificate"]
            lines.append(f"  certificate: {cert['kind']} ({cert['value_claim']})")
            if cert.get("ranks"):
                lines.append(f"  ranks M_0..M_n: {cert['ranks']['ranks']} (tol {cert['ranks']['tol']})")
            fired = cert["details"].get("fired")
            if fired:
                lines.append(f"  fired: {cert['details'].get('test')}: {fired}")
            if cert.get("measure"):
                for p, w in zip(cert["measure"]["points"], cert["measure"]["weights"]):
                    lines.append(f"  atom {np.round(p, 8).tolist()} weight {w:.6g}")
            for note in cert.get("notes", []):
                lines.append(f"  note: {note}")
            if o.get("oracle_check"):
                lines.append(f"  oracle check: {o['oracle_check']}")
        if self.oracle:
            lines.append(f"oracle ({self.oracle['method']}): value {self.oracle['value']} at "
                         f"{np.round(self.oracle['points'], 6).tolist()}")
        lines.append(f"outcome: {self.outcome.get('summary')} (exit {self.exit_code})")
        return "\n".join(lines) + "\n"


def _order_range(prob: ProblemFile, opts: RunOptions):
    P = prob.pop
    if P.is_unconstrained:
        deg = P.objective.degree
        if deg % 2 or deg < 2:
            raise ProblemError(f"objective: unconstrained problems need even degree >= 2, got {deg}")
        return [deg // 2]
    lo = P.min_order() if opts.order is None else opts.order
    if lo < P.min_order():
        raise ProblemError(f"order {lo} is below the minimum max(v, d_f) = {P.min_order()}")
    if opts.max_order is not None:
        hi = opts.max_order
    elif opts.order is not None:
        hi = lo
    else:
        hi = lo + opts.extra_orders
    if hi < lo:
        raise ProblemError(f"max order {hi} is below the first order {lo}")
    return list(range(lo, hi + 1))


def run(problem, opts: RunOptions | None = None) -> Report:
    """Solve and certify the relaxations of ``problem`` over the requested orders."""
    opts = opts or RunOptions()
    prob = problem if isinstance(problem, ProblemFile) else parse_problem(problem)
    P = prob.pop
    report = Report(prob.to_dict(), opts.to_dict())
    orders = _order_range(prob, opts)
    ssettings = SolverSettings(feas_tol=opts.tol_solve, gap_tol=opts.tol_solve, backend=opts.solver)
    csettings = CertifySettings(tol_rank=opts.tol_rank, seed=opts.seed, scale=opts.scale_radius)

    orc = None
    if opts.oracle:
        try:
            orc = oracle(P, prob.box, seed=opts.seed)
            report.oracle = orc.to_dict()
        except ValueError as exc:
            report.oracle = {"error": str(exc)}

    exact_at = None
    errors = 0
    for n in orders:
        entry = {"order": n}
        try:
            prog = (build_unconstrained(P.objective, opts.scale_radius) if P.is_unconstrained
                    else build_Qn(P, n, opts.scale_radius))
            res = solve(prog, ssettings)
            cert = certify(P, n, res, csettings)
        except (ValueError, RuntimeError) as exc:
            entry.update(status="error", value=None, error=str(exc))
            report.orders.append(entry)
            errors += 1
            continue
        entry.update(
            kind=prog.meta.get("kind"),
            status=res.status,
            value=res.value if res.optimal else None,
            solver={
                "iterations": res.iterations,
                "primal_infeasibility": res.primal_infeasibility,
                "dual_infeasibility": res.dual_infeasibility,
                "relative_gap": res.relative_gap,
                "complementarity": list(res.complementarity),
                "message": res.message,
            },
            certificate=cert.to_dict(),
        )
        if orc is not None and np.isfinite(orc.value):
            entry["oracle_check"] = _oracle_check(res, cert, orc, opts.tol_solve)
        report.orders.append(entry)
        if cert.exact and exact_at is None:
            exact_at = n
            if not opts.all_orders:
                break

    if exact_at is not None:
        code, summary = EXIT_EXACT, f"exact at order {exact_at}"
    elif errors == len(orders):
        code, summary = EXIT_ERROR, "every order failed"
    else:
        code, summary = EXIT_INCONCLUSIVE, f"inconclusive up to order {orders[-1]}"
    report.outcome = {"exit_code": code, "summary": summary, "exact_order": exact_at}
    return report


def _oracle_check(res, cert, orc, tol) -> dict:
    out = {"oracle_value": orc.value}
    if res.optimal:
        out["gap"] = orc.value - res.value
        # relaxation values are lower bounds of the box-restricted minimum
        out["lower_bound_ok"] = bool(res.value <= orc.value + 1e-6 * (1 + abs(orc.value)))
        if cert.exact:
            out["value_matches"] = bool(abs(orc.value - res.value) <= 1e-5 * (1 + abs(orc.value)))
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="momentsos",
        description="Solve a polynomial optimization problem by moment relaxations and certify exactness.",
    )
    p.add_argument("problem", help="problem file (JSON), or - for stdin")
    p.add_argument("--order", type=int, help="first relaxation order (default: smallest admissible)")
    p.add_argument("--max-order", type=int, help="last relaxation order (default: first + 3, "
                                                  "or just the first when --order is given)")
    p.add_argument("--all-orders", action="store_true", help="keep going after the first exact order")
    p.add_argument("--tol-rank", type=float, default=1e-6, help="relative singular value threshold")
    p.add_argument("--tol-solve", type=float, default=1e-9, help="solver feasibility and gap tolerance")
    p.add_argument("--solver", default="bundled", help="bundled, adapter (uses $MOMENTSOS_ADAPTER) or adapter:CMD")
    p.add_argument("--oracle", choices=("on", "off"), default="on", help="grid/multistart cross-check")
    p.add_argument("--report", choices=("json", "text"), default="text")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale-radius", type=float, default=1.0, help="solve in x / R")
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        if args.problem == "-":
            try:
                data = json.load(sys.stdin)
            except json.JSONDecodeError as exc:
                raise ProblemError(f"<stdin>: invalid JSON at line {exc.lineno}, column {exc.colno}") from None
            prob = parse_problem(data)
        else:
            prob = load_problem(args.problem)
        opts = RunOptions(args.order, args.max_order, args.all_orders, args.tol_rank, args.tol_solve,
                          args.solver, args.oracle == "on", args.seed, args.scale_radius)
        report = run(prob, opts)
    except (ProblemError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = report.to_json() if args.report == "json" else report.to_text()
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
