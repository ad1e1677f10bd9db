"""Score the built-in optimizers head-to-head on a small benchmark slice.

`run_candidate` runs one optimizer over every (function, instance) cell
and seed, then averages the per-cell anytime scores into one fitness
number.  The same entry point accepts a registry name, a factory, or a
worker command line, so native code and subprocess workers are scored
identically.
"""

import numpy as np

from evobo.problems import ProblemSpec
from evobo.protocol import run_candidate

specs = [
    ProblemSpec(fid, iid, 2)
    for fid in (2, 8, 15, 21)
    for iid in (1, 2)
]
seeds = [0, 1, 2]
budget = 60

print(f"{len(specs)} cells x {len(seeds)} seeds, budget {budget}, d=2\n")

reports = {}
for name in ("random", "gp-lcb", "atrbo"):
    reports[name] = run_candidate(name, specs, seeds, budget=budget, workers=4)

print("per-cell mean anytime score over seeds:")
header = "  cell      " + "".join(f"{name:>9}" for name in reports)
print(header)
for spec in specs:
    row = f"  f{spec.function_id:02d} i{spec.instance_id:02d}  "
    for name, report in reports.items():
        cell_scores = [
            score
            for (fid, iid, seed), score in report.per_cell.items()
            if (fid, iid) == (spec.function_id, spec.instance_id)
        ]
        row += f"{np.mean(cell_scores):9.4f}"
    print(row)

print("\naggregate fitness:")
for name, report in reports.items():
    flag = f"  ({len(report.failures)} failed cells)" if report.failures else ""
    print(f"  {name:8} {report.aggregate:.4f}{flag}")
