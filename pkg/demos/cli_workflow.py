"""The full command-line round trip on a custom problem.

Builds a small QP from scratch, saves it in the plain-text problem
format, then drives the `saddlekit` command exactly as one would from
a shell: solve to a trace CSV, analyze the trace into a report, and
sample the sharpness constants with an authorized auxiliary solve.
Every artifact is a text file meant to be versioned and diffed;
identical flags always reproduce identical bytes (the one exception is
the wall-time line of the solve summary).

Run from the repository root:

    python3 demos/cli_workflow.py
"""

import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from saddlekit import AffineConstraint, ProblemSpec, save


def cli(*flags):
    cmd = [sys.executable, "-m", "saddlekit.cli", *flags]
    print(f"$ saddlekit {' '.join(flags)}")
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.stderr:
        print(proc.stderr.rstrip())
    print(f"  -> exit {proc.returncode}")
    return proc


work = Path(tempfile.mkdtemp(prefix="saddlekit-demo-"))
print(f"working in {work}\n")

# a box QP: pull toward (3, 3) while staying in [0, 1]^2
spec = ProblemSpec(
    c=np.array([-3.0, -3.0]),
    Q=np.eye(2),
    constraints=(
        AffineConstraint(np.array([1.0, 0.0]), 1.0),
        AffineConstraint(np.array([0.0, 1.0]), 1.0),
        AffineConstraint(np.array([-1.0, 0.0]), 0.0),
        AffineConstraint(np.array([0.0, -1.0]), 0.0),
    ),
    name="box-pull",
)
prob = work / "box.prob"
save(spec, prob)
print(f"wrote {prob.name}:")
print("  " + prob.read_text().replace("\n", "\n  ").rstrip())
print()

trace = work / "box.csv"
cli("solve", "--instance", str(prob), "--algo", "admm", "--out", str(trace))
rows = trace.read_text().splitlines()
print(f"  trace: {len(rows) - 1} recorded iterations\n")

report = work / "box.report"
cli("analyze", "--trace", str(trace), "--instance", str(prob),
    "--out", str(report))
print("  report:")
print("  " + report.read_text().replace("\n", "\n  ").rstrip())
print()

# no exact solution set ships with a custom file, so the sharpness
# sampler needs an explicit budget for its reference solve
moduli = work / "box.moduli"
cli("moduli", "--instance", str(prob), "--samples", "5000",
    "--aux-iters", "200000", "--out", str(moduli))
print("  moduli report:")
print("  " + moduli.read_text().replace("\n", "\n  ").rstrip())
