"""Native reference optimizers: adaptive trust-region BO, uniform random
search, and a plain GP-LCB loop, plus the Gaussian-process core they share.

The trust-region optimizer shrinks its sampling radius by a factor rho each
iteration while inflating the exploration weight kappa by the same factor,
keeping both inside fixed clip ranges.  All optimizers are engines: calling
them with an objective function runs the full evaluation budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist
from scipy.stats import qmc

from .metrics import Trace
from .problems import ProblemInstance
from .protocol import EvalSession

__all__ = [
    "GPModel",
    "SingularKernel",
    "LengthMismatch",
    "DimensionMismatch",
    "ATRBOParams",
    "ATRBO",
    "RandomSearch",
    "GPLCB",
    "REGISTRY",
    "sample_points",
    "gp_fit",
    "gp_predict",
    "lcb",
    "atrbo_run",
    "random_search_run",
    "gp_lcb_run",
]


class SingularKernel(RuntimeError):
    """Kernel factorization failed even at the maximum jitter."""


class LengthMismatch(ValueError):
    """Acquisition inputs of different lengths."""


class DimensionMismatch(ValueError):
    """Query dimension differs from the training dimension."""


# ---------------------------------------------------------------------------
# Sobol-on-hypersphere sampling
# ---------------------------------------------------------------------------


def sample_points(n: int, center, radius: float, bounds, seed) -> np.ndarray:
    """n Sobol points projected to the radius-``radius`` sphere around
    ``center``, clipped to the box.

    ``bounds`` is a (lower, upper) pair, scalars or per-coordinate vectors.
    The same (n, seed) always yields the same point set.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if radius <= 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    center = np.asarray(center, dtype=float)
    d = center.size
    lower, upper = (np.broadcast_to(np.asarray(b, dtype=float), (d,)) for b in bounds)
    # Draw a full power-of-2 block and slice: identical leading points, but
    # no balance warning and no thread-unsafe warning-filter fiddling.
    m = max(0, int(n - 1).bit_length())
    raw = qmc.Sobol(d, scramble=True, seed=seed).random_base2(m)[:n]
    pts = 2.0 * raw - 1.0
    norms = np.linalg.norm(pts, axis=1)
    degenerate = norms < 1e-12
    if np.any(degenerate):
        pts[degenerate] = 0.0
        pts[degenerate, 0] = 1.0
        norms[degenerate] = 1.0
    unit = pts / norms[:, None]
    return np.clip(center + radius * unit, lower, upper)


# ---------------------------------------------------------------------------
# Gaussian-process core
# ---------------------------------------------------------------------------

_JITTERS = (1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2)
_LENGTHSCALE_GRID = np.logspace(-2, 2, 25)


@dataclass
class GPModel:
    """Fitted squared-exponential GP with standardized targets.

    ``y_scale`` is the target standard deviation used for de-standardizing
    predictions (1.0 on the constant-target path, where the model predicts
    the constant with the prior standard deviation).
    """

    X: np.ndarray
    lengthscale: float
    signal_variance: float
    jitter: float
    y_mean: float
    y_scale: float
    alpha: np.ndarray | None
    chol: np.ndarray | None
    degenerate: bool


def _factor_with_jitter(K: np.ndarray):
    """Lower Cholesky of K + jitter*I, escalating jitter until it succeeds."""
    n = K.shape[0]
    for jitter in _JITTERS:
        try:
            L = cholesky(K + jitter * np.eye(n), lower=True)
            return L, jitter
        except LinAlgError:
            continue
    return None, None


def gp_fit(X, y) -> GPModel:
    """Fit the surrogate: standardize targets, pick the lengthscale by log
    marginal likelihood over a fixed grid, factor with escalating jitter."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 2:
        raise ValueError(f"need at least 2 observations, got {X.shape[0]}")
    if X.shape[0] != y.size:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.size} entries")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite entries in training data")

    y_mean = float(np.mean(y))
    y_std = float(np.std(y))
    if y_std < 1e-12:
        # Constant targets: predictions collapse to the constant and the
        # predictive std falls back to the prior at unit scale.
        return GPModel(
            X=X,
            lengthscale=1.0,
            signal_variance=1.0,
            jitter=_JITTERS[0],
            y_mean=y_mean,
            y_scale=1.0,
            alpha=None,
            chol=None,
            degenerate=True,
        )

    ys = (y - y_mean) / y_std
    n = X.shape[0]
    d2 = cdist(X, X, "sqeuclidean")
    best = None
    for ls in _LENGTHSCALE_GRID:
        K = np.exp(-0.5 * d2 / (ls * ls))
        L, jitter = _factor_with_jitter(K)
        if L is None:
            continue
        alpha = cho_solve((L, True), ys)
        lml = (
            -0.5 * float(ys @ alpha)
            - float(np.sum(np.log(np.diag(L))))
            - 0.5 * n * math.log(2.0 * math.pi)
        )
        if best is None or lml > best[0]:
            best = (lml, float(ls), L, alpha, jitter)
    if best is None:
        raise SingularKernel(
            f"kernel factorization failed for all lengthscales at jitter {_JITTERS[-1]}"
        )
    _, ls, L, alpha, jitter = best
    return GPModel(
        X=X,
        lengthscale=ls,
        signal_variance=1.0,
        jitter=jitter,
        y_mean=y_mean,
        y_scale=y_std,
        alpha=alpha,
        chol=L,
        degenerate=False,
    )


def gp_predict(model: GPModel, Q) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and std per query row, on the original target scale."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim == 1:
        Q = Q.reshape(1, -1) if Q.size else Q.reshape(0, model.X.shape[1])
    if Q.shape[0] == 0:
        return np.empty(0), np.empty(0)
    if Q.shape[1] != model.X.shape[1]:
        raise DimensionMismatch(
            f"queries have dim {Q.shape[1]}, training data has {model.X.shape[1]}"
        )
    if model.degenerate:
        n = Q.shape[0]
        prior_std = model.y_scale * math.sqrt(model.signal_variance)
        return np.full(n, model.y_mean), np.full(n, prior_std)
    k_star = np.exp(-0.5 * cdist(model.X, Q, "sqeuclidean") / model.lengthscale**2)
    mean_s = k_star.T @ model.alpha
    v = solve_triangular(model.chol, k_star, lower=True)
    var = np.maximum(model.signal_variance - np.sum(v * v, axis=0), 0.0)
    return model.y_mean + model.y_scale * mean_s, model.y_scale * np.sqrt(var)


def lcb(means, stds, kappa: float) -> np.ndarray:
    """Lower confidence bound, elementwise mean - kappa*std; minimize it."""
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    if means.shape != stds.shape:
        raise LengthMismatch(f"means shape {means.shape} != stds shape {stds.shape}")
    return means - kappa * stds


# ---------------------------------------------------------------------------
# Reference optimizers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ATRBOParams:
    """Trust-region schedule; the adaptive flags freeze r or kappa for
    ablation arms."""

    r0: float = 2.5
    rho: float = 0.95
    kappa0: float = 2.0
    adaptive_r: bool = True
    adaptive_kappa: bool = True


@dataclass
class _Incumbent:
    x: np.ndarray | None = None
    y: float = math.inf

    def update(self, x, y):
        if y < self.y:
            self.x = np.asarray(x, dtype=float).copy()
            self.y = float(y)


class ATRBO:
    """Adaptive trust-region BO engine.

    Spends budget/5 evaluations (at most 10 per dimension) on a Sobol
    sphere design over the box, then repeatedly fits the GP to all data,
    samples 100*d candidates on a radius-r sphere around the incumbent,
    and evaluates the LCB minimizer.  After every iteration r shrinks by
    rho (floor 1e-2) and kappa grows by 1/rho (cap 10).
    """

    def __init__(self, dim, budget, seed, params: ATRBOParams | None = None,
                 lower: float = -5.0, upper: float = 5.0):
        if budget < 5:
            raise ValueError(f"budget must be >= 5, got {budget}")
        self.dim = int(dim)
        self.budget = int(budget)
        self.seed = seed
        self.params = params if params is not None else ATRBOParams()
        self.lower = np.full(self.dim, float(lower))
        self.upper = np.full(self.dim, float(upper))
        self.r_history: list[float] = []
        self.kappa_history: list[float] = []
        self.fallback_iterations: list[int] = []

    def __call__(self, objective):
        p = self.params
        d = self.dim
        rng = np.random.default_rng(self.seed)
        half_range = float(np.max(self.upper - self.lower)) / 2.0
        r = p.r0
        kappa = p.kappa0
        incumbent = _Incumbent()
        bounds = (self.lower, self.upper)

        n_init = max(1, min(10 * d, self.budget // 5))
        design = sample_points(
            n_init,
            center=(self.lower + self.upper) / 2.0,
            radius=half_range,
            bounds=bounds,
            seed=int(rng.integers(2**31)),
        )
        xs: list[np.ndarray] = []
        ys: list[float] = []
        for x in design:
            y = objective(x)
            xs.append(np.asarray(x, dtype=float))
            ys.append(float(y))
            incumbent.update(x, y)

        iteration = 0
        while len(ys) < self.budget:
            x_next = None
            if len(xs) >= 2:
                try:
                    model = gp_fit(np.vstack(xs), np.asarray(ys))
                    candidates = sample_points(
                        100 * d,
                        center=incumbent.x,
                        radius=r,
                        bounds=bounds,
                        seed=int(rng.integers(2**31)),
                    )
                    means, stds = gp_predict(model, candidates)
                    x_next = candidates[int(np.argmin(lcb(means, stds, kappa)))]
                except (SingularKernel, LinAlgError):
                    x_next = None
            if x_next is None:
                # Too little data or a failed fit: keep the run budget-complete
                # with a uniform draw and note the iteration.
                self.fallback_iterations.append(iteration)
                x_next = rng.uniform(self.lower, self.upper)
            y_next = objective(x_next)
            xs.append(np.asarray(x_next, dtype=float))
            ys.append(float(y_next))
            incumbent.update(x_next, y_next)

            if p.adaptive_r:
                r = min(max(r * p.rho, 1e-2), half_range)
            if p.adaptive_kappa:
                kappa = min(max(kappa / p.rho, 0.1), 10.0)
            self.r_history.append(r)
            self.kappa_history.append(kappa)
            iteration += 1

        return incumbent.y, incumbent.x


class RandomSearch:
    """Uniform sampling over the box; the baseline everything must beat."""

    def __init__(self, dim, budget, seed, lower: float = -5.0, upper: float = 5.0):
        if budget < 1:
            raise ValueError(f"budget must be >= 1, got {budget}")
        self.dim = int(dim)
        self.budget = int(budget)
        self.seed = seed
        self.lower = np.full(self.dim, float(lower))
        self.upper = np.full(self.dim, float(upper))

    def __call__(self, objective):
        rng = np.random.default_rng(self.seed)
        incumbent = _Incumbent()
        for _ in range(self.budget):
            x = rng.uniform(self.lower, self.upper)
            incumbent.update(x, objective(x))
        return incumbent.y, incumbent.x


class GPLCB:
    """Plain GP-LCB loop: full-box uniform candidates, fixed kappa = 2.

    The initial design covers min(10*d, budget) points, so tiny budgets
    reduce to a pure Sobol design with no surrogate iterations.
    """

    KAPPA = 2.0

    def __init__(self, dim, budget, seed, lower: float = -5.0, upper: float = 5.0):
        if budget < 5:
            raise ValueError(f"budget must be >= 5, got {budget}")
        self.dim = int(dim)
        self.budget = int(budget)
        self.seed = seed
        self.lower = np.full(self.dim, float(lower))
        self.upper = np.full(self.dim, float(upper))
        self.fallback_iterations: list[int] = []

    def __call__(self, objective):
        d = self.dim
        rng = np.random.default_rng(self.seed)
        incumbent = _Incumbent()
        bounds = (self.lower, self.upper)
        n_init = min(10 * d, self.budget)
        design = sample_points(
            n_init,
            center=(self.lower + self.upper) / 2.0,
            radius=float(np.max(self.upper - self.lower)) / 2.0,
            bounds=bounds,
            seed=int(rng.integers(2**31)),
        )
        xs: list[np.ndarray] = []
        ys: list[float] = []
        for x in design:
            y = objective(x)
            xs.append(np.asarray(x, dtype=float))
            ys.append(float(y))
            incumbent.update(x, y)

        iteration = 0
        while len(ys) < self.budget:
            x_next = None
            try:
                model = gp_fit(np.vstack(xs), np.asarray(ys))
                candidates = rng.uniform(self.lower, self.upper, size=(100 * d, d))
                means, stds = gp_predict(model, candidates)
                x_next = candidates[int(np.argmin(lcb(means, stds, self.KAPPA)))]
            except (SingularKernel, LinAlgError):
                self.fallback_iterations.append(iteration)
                x_next = rng.uniform(self.lower, self.upper)
            y_next = objective(x_next)
            xs.append(np.asarray(x_next, dtype=float))
            ys.append(float(y_next))
            incumbent.update(x_next, y_next)
            iteration += 1

        return incumbent.y, incumbent.x


# Factories with the engine-building signature the session runner expects.
REGISTRY = {
    "atrbo": lambda dim, budget, seed: ATRBO(dim, budget, seed),
    "random": lambda dim, budget, seed: RandomSearch(dim, budget, seed),
    "gp-lcb": lambda dim, budget, seed: GPLCB(dim, budget, seed),
}


# ---------------------------------------------------------------------------
# Instance-level runners
# ---------------------------------------------------------------------------


def _run_engine(engine, instance: ProblemInstance, budget: int, seed: int) -> Trace:
    session = EvalSession(instance, budget, seed)
    engine(session.evaluate)
    return session.trace()


def atrbo_run(
    instance: ProblemInstance,
    budget: int,
    seed: int,
    params: ATRBOParams | None = None,
) -> Trace:
    """Full trust-region run on one instance; returns the best-so-far trace."""
    return _run_engine(
        ATRBO(instance.spec.dim, budget, seed, params), instance, budget, seed
    )


def random_search_run(instance: ProblemInstance, budget: int, seed: int) -> Trace:
    return _run_engine(
        RandomSearch(instance.spec.dim, budget, seed), instance, budget, seed
    )


def gp_lcb_run(instance: ProblemInstance, budget: int, seed: int) -> Trace:
    return _run_engine(
        GPLCB(instance.spec.dim, budget, seed), instance, budget, seed
    )
