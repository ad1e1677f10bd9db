"""Anytime scoring: area over the convergence curve, loss, normalized regret.

The per-evaluation contribution log-normalizes the best-so-far precision
(best value minus the known optimum) between a lower and an upper precision
bound; the precision itself is clipped into [lb, ub] before taking log10.
A run's score is the mean contribution over the evaluation budget, and the
evolutionary fitness is the unweighted mean over all (function, instance,
seed) cells with failed cells scored zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AOCCConfig",
    "Trace",
    "FitnessReport",
    "EmptyTrace",
    "InvalidTrace",
    "NoCells",
    "DegenerateRange",
    "ub_for_dim",
    "precision_contribution",
    "aocc",
    "aggregate_fitness",
    "loss_series",
    "normalized_regret",
]


class EmptyTrace(ValueError):
    """Raised when a scoring operation receives a zero-length trace."""


class InvalidTrace(ValueError):
    """Raised when trace values violate the best-so-far invariants."""


class NoCells(ValueError):
    """Raised when aggregation receives no per-cell scores."""


class DegenerateRange(ValueError):
    """Raised when a normalization range has s_max <= s_min."""


# Relative slack for the value >= f_opt check; absorbs float rounding when a
# trace touches the optimum exactly.
_F_OPT_SLACK = 1e-9


def ub_for_dim(dim: int) -> float:
    """Upper precision bound: 1e4 up to 5 dimensions, 1e9 above."""
    return 1e4 if dim <= 5 else 1e9


@dataclass(frozen=True)
class AOCCConfig:
    """Precision bounds and evaluation budget for one scoring context."""

    lb: float = 1e-8
    ub: float = 1e4
    budget: int = 100

    def __post_init__(self):
        if not (0.0 < self.lb < self.ub):
            raise ValueError(f"need 0 < lb < ub, got lb={self.lb}, ub={self.ub}")
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")

    @classmethod
    def for_dim(cls, dim: int, budget: int) -> "AOCCConfig":
        return cls(lb=1e-8, ub=ub_for_dim(dim), budget=budget)


@dataclass(frozen=True)
class Trace:
    """Best-so-far objective values of one run, plus the instance optimum.

    values[i] is the best value seen after evaluation i+1; the sequence is
    non-increasing and never drops below f_opt (within float slack).
    """

    values: tuple
    f_opt: float

    def __init__(self, values, f_opt: float):
        values = tuple(float(v) for v in values)
        f_opt = float(f_opt)
        for a, b in zip(values, values[1:]):
            if b > a:
                raise InvalidTrace(f"best-so-far must be non-increasing, saw {a} -> {b}")
        floor = f_opt - _F_OPT_SLACK * max(1.0, abs(f_opt))
        for v in values:
            if v < floor:
                raise InvalidTrace(f"value {v} below the instance optimum {f_opt}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "f_opt", f_opt)

    def __len__(self):
        return len(self.values)

    def precisions(self) -> np.ndarray:
        """Nonnegative best-so-far distance to the optimum per evaluation."""
        return np.maximum(np.asarray(self.values, dtype=float) - self.f_opt, 0.0)


def precision_contribution(delta_f, cfg: AOCCConfig):
    """Log-normalized contribution of one precision value, in [0, 1].

    Precisions at or below lb score 1, at or above ub score 0.  Accepts a
    scalar or an array; tiny negative inputs (float noise at the optimum)
    clip to lb like zero does.
    """
    delta = np.clip(np.asarray(delta_f, dtype=float), cfg.lb, cfg.ub)
    span = math.log10(cfg.ub) - math.log10(cfg.lb)
    out = 1.0 - (np.log10(delta) - math.log10(cfg.lb)) / span
    if np.isscalar(delta_f) or np.ndim(delta_f) == 0:
        return float(out)
    return out


def aocc(trace: Trace, cfg: AOCCConfig) -> float:
    """Mean precision contribution over the budget.

    Traces shorter than the budget are padded with their final value;
    longer traces violate the budget invariant and are rejected.
    """
    n = len(trace)
    if n == 0:
        raise EmptyTrace("cannot score an empty trace")
    if n > cfg.budget:
        raise InvalidTrace(f"trace length {n} exceeds budget {cfg.budget}")
    prec = trace.precisions()
    if n < cfg.budget:
        prec = np.concatenate([prec, np.full(cfg.budget - n, prec[-1])])
    return float(np.mean(precision_contribution(prec, cfg)))


def aggregate_fitness(cells) -> float:
    """Unweighted mean over per-cell scores; None entries count as 0.

    Accepts a mapping cell -> score or a plain iterable of scores.
    """
    if hasattr(cells, "values"):
        scores = list(cells.values())
    else:
        scores = list(cells)
    if not scores:
        raise NoCells("no per-cell scores to aggregate")
    total = 0.0
    for s in scores:
        total += 0.0 if s is None else float(s)
    return total / len(scores)


@dataclass(frozen=True)
class FitnessReport:
    """Per-cell scores keyed by (function_id, instance_id, seed), aggregate,
    and the failure diagnostics behind any zero-scored cells."""

    per_cell: dict
    aggregate: float
    failures: list = field(default_factory=list)

    @classmethod
    def from_cells(cls, per_cell: dict, failures=None) -> "FitnessReport":
        return cls(
            per_cell=dict(per_cell),
            aggregate=aggregate_fitness(per_cell),
            failures=list(failures or []),
        )


def loss_series(trace: Trace) -> np.ndarray:
    """Best-so-far distance to the optimum at every evaluation."""
    if len(trace) == 0:
        raise EmptyTrace("cannot compute loss of an empty trace")
    return trace.precisions()


def normalized_regret(scores, s_min: float, s_max: float) -> np.ndarray:
    """Running-minimum scores rescaled to [0, 1] by the best/worst bounds."""
    if s_max <= s_min:
        raise DegenerateRange(f"need s_max > s_min, got [{s_min}, {s_max}]")
    scores = np.asarray(scores, dtype=float)
    running = np.minimum.accumulate(scores)
    return np.clip((running - s_min) / (s_max - s_min), 0.0, 1.0)
