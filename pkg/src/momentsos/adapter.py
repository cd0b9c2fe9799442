"""Reference solver adapter: JSON program on stdin, JSON result on stdout.

Run as ``python -m momentsos.adapter``.  Any executable speaking the same
protocol can be plugged in with ``--solver adapter:PATH`` or the
``MOMENTSOS_ADAPTER`` environment variable.  The input is
``{"program": <ConicProgram.to_dict()>, "settings": {...}}``; the output is
``SolveResult.to_dict()``.
"""

from __future__ import annotations

import json
import sys

from .relaxation import ConicProgram
from .sdp import SolverSettings, solve

_KEYS = ("feas_tol", "gap_tol", "max_iter")


def main(stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    try:
        data = json.load(stdin)
        prog = ConicProgram.from_dict(data["program"])
        opts = {k: v for k, v in data.get("settings", {}).items() if k in _KEYS}
    except (ValueError, KeyError, TypeError) as exc:
        print(f"adapter: bad input: {exc}", file=sys.stderr)
        return 1
    res = solve(prog, SolverSettings(backend="bundled", **opts))
    json.dump(res.to_dict(), stdout)
    stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
