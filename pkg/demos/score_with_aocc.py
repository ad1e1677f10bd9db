"""How a run's history turns into a single anytime score.

The area over the convergence curve (AOCC) rewards reaching good precision
early: each evaluation contributes 1 minus the normalized log-precision of
the best value so far, and the score is the mean contribution over the
budget.  A run that stops early is padded with its last best value, so
wasted budget costs score.
"""

from evobo.metrics import AOCCConfig, aggregate_fitness, aocc, precision_contribution
from evobo.metrics import Trace

cfg = AOCCConfig(budget=10)   # lb 1e-8, ub 1e4: the low-dimension range

print("per-evaluation contribution at selected precisions:")
for precision in (1e4, 1e1, 1.0, 1e-4, 1e-8, 1e-12):
    c = float(precision_contribution(precision, cfg))
    print(f"  |f - f_opt| = {precision:8.0e}  ->  contribution {c:.4f}")

# A trace records the best value so far after each evaluation, together
# with the instance optimum (here 0), so it is non-increasing by design.
steady = Trace([100.0, 10.0, 1.0, 0.1, 0.01, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7], 0.0)
lucky_early = Trace([1e-7] * 10, 0.0)               # solved on the first try
late_only = Trace([100.0] * 9 + [1e-7], 0.0)        # solved on the last try
stopped = Trace([100.0, 10.0, 1.0], 0.0)            # gave up after 3 of 10

print("\nAOCC over a budget of 10:")
for label, trace in [
    ("steady improvement", steady),
    ("solved immediately", lucky_early),
    ("late single hit   ", late_only),
    ("stopped after 3   ", stopped),
]:
    print(f"  {label}  {aocc(trace, cfg):.4f}")

# Aggregate fitness is the unweighted mean over benchmark cells; a cell
# whose run produced nothing scores zero and drags the mean down.
cells = {(2, 1, 0): 0.61, (2, 2, 0): 0.55, (15, 1, 0): 0.0}
print(f"\naggregate over three cells (one failed): {aggregate_fitness(cells.values()):.4f}")
