"""Drive the command line front end on the bundled problem files and read back the JSON report.

    python demos/cli_usage.py
"""

import json
import subprocess
import sys
from pathlib import Path

problems = Path(__file__).resolve().parent.parent / "problems"

# Text report for the half-plane problem; exit code 0 means an exact certificate was found
out = subprocess.run([sys.executable, "-m", "momentsos", str(problems / "qcqp_halfplane.json")],
                     capture_output=True, text=True)
print(out.stdout)
print("exit code", out.returncode)

# JSON report, every order from 1 to 3 even after the first exact one
out = subprocess.run([sys.executable, "-m", "momentsos", str(problems / "two_minimizers.json"),
                      "--report", "json", "--all-orders", "--max-order", "3"],
                     capture_output=True, text=True)
report = json.loads(out.stdout)
for entry in report["orders"]:
    cert = entry["certificate"]
    print(entry["order"], entry["status"], entry["value"], cert["kind"], cert["details"].get("fired"))
print("outcome:", report["outcome"])

# An inconclusive problem exits with 2
out = subprocess.run([sys.executable, "-m", "momentsos", str(problems / "motzkin.json"), "--oracle", "off"],
                     capture_output=True, text=True)
print(out.stdout)
print("exit code", out.returncode)
