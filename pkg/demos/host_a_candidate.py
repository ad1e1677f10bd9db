"""Score a candidate source file by hosting it behind the wire shim.

The shim (package `candidate-shim`) runs in a separate process: it loads a
class in the template shape from a plain source file, restricts what it
may import, and turns every objective call into one ask/tell exchange.
The orchestrator on this side owns the objective and the budget, so the
two sides only share the wire protocol.
"""

import sys
import tempfile
from pathlib import Path

from evobo.problems import ProblemSpec
from evobo.protocol import run_candidate

CANDIDATE = '''\
import numpy as np


class AxisWalkBO:
    """Coordinate descent with a shrinking step."""

    def __init__(self, budget, dim):
        self.budget = budget
        self.dim = dim

    def __call__(self, func):
        x = np.zeros(self.dim)
        best_y = func(x)
        step, used = 2.5, 1
        while used < self.budget:
            for axis in range(self.dim):
                if used >= self.budget:
                    break
                trial = x.copy()
                trial[axis] += step
                y = func(trial)
                used += 1
                if y < best_y:
                    best_y, x = y, trial
                else:
                    step = -step * 0.7
        return best_y, x
'''

workdir = Path(tempfile.mkdtemp())
source = workdir / "axis_walk.py"
source.write_text(CANDIDATE)

argv = [sys.executable, "-m", "candidate_shim", str(source), "AxisWalkBO"]
specs = [ProblemSpec(2, 1, 2), ProblemSpec(8, 1, 2)]

report = run_candidate(argv, specs, seeds=[0, 1], budget=40)
print(f"hosted {source.name} over {len(report.per_cell)} runs")
for cell, score in sorted(report.per_cell.items()):
    print(f"  f{cell[0]:02d} i{cell[1]:02d} seed {cell[2]}: anytime score {score:.4f}")
print(f"aggregate fitness: {report.aggregate:.4f}")
if any(s == 0.0 for s in report.per_cell.values()) and not report.failures:
    print("(a zero without a failure means the run never reached the scored precision band)")

# The same candidate with a forbidden import never gets to run: the shim
# refuses it on the wire and every cell scores zero.
tainted = workdir / "tainted.py"
tainted.write_text("import requests\n" + CANDIDATE)
refused = run_candidate(
    [sys.executable, "-m", "candidate_shim", str(tainted), "AxisWalkBO"],
    specs,
    seeds=[0],
    budget=40,
)
print(f"\ntainted variant aggregate: {refused.aggregate}")
print(f"refusal recorded for cell {refused.failures[0][0]}:")
print(f"  {refused.failures[0][1].splitlines()[-1]}")
