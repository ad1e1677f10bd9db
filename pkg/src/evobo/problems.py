"""Instance-parameterized noiseless test functions with known optima.

Each function id follows the published BBOB core definitions (oscillation,
asymmetry and conditioning transforms, boundary penalty).  Instances are
generated from a counter-based seeded scheme: instance 0 is the identity
instance (zero shift, zero offset, identity rotations), instances >= 1 draw
their optimum location, value offset and rotations deterministically from
the (function_id, instance_id) key.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ProblemSpec",
    "ProblemInstance",
    "UnknownFunction",
    "InvalidDim",
    "DimensionMismatch",
    "make_instance",
    "training_subset",
    "implemented_functions",
    "function_name",
]


class UnknownFunction(ValueError):
    """Raised for a function id outside the implemented registry."""


class InvalidDim(ValueError):
    """Raised when the requested dimension is below 2."""


class DimensionMismatch(ValueError):
    """Raised when an evaluation point has the wrong length."""


LOWER_BOUND = -5.0
UPPER_BOUND = 5.0

_FUNCTION_NAMES = {
    1: "sphere",
    2: "separable ellipsoid",
    4: "buche-rastrigin",
    6: "attractive sector",
    8: "rosenbrock",
    12: "bent cigar",
    14: "sum of different powers",
    15: "rastrigin (rotated)",
    18: "schaffers f7 (ill-conditioned)",
    21: "gallagher 101 peaks",
    23: "katsuura",
}

# Functions whose value depends on x only through x - x_opt (no raw-x
# boundary penalty, no x_opt-dependent scaling), so instances are pure
# translations of each other.
_PURE_SHIFT = {1, 2, 8}

_TRAINING_SUBSET = [2, 4, 6, 8, 12, 14, 15, 18, 21, 23]


@dataclass(frozen=True)
class ProblemSpec:
    """Identifies one test function variant.

    (function_id, instance_id, dim) fully determines the instance; the
    search box is always [-5, 5] per coordinate.
    """

    function_id: int
    instance_id: int
    dim: int
    lower: float = LOWER_BOUND
    upper: float = UPPER_BOUND


class ProblemInstance:
    """A concrete shifted/rotated function with a known optimum.

    Immutable after construction; ``evaluate`` is pure and thread-safe.
    """

    def __init__(self, spec, x_opt, f_opt, rotation, rotation2, core, pure_shift):
        self.spec = spec
        self.x_opt = x_opt
        self.f_opt = f_opt
        self.rotation = rotation
        self.rotation2 = rotation2
        self._core = core
        self.pure_shift = pure_shift
        x_opt.setflags(write=False)
        rotation.setflags(write=False)
        rotation2.setflags(write=False)

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.spec.dim,):
            raise DimensionMismatch(
                f"expected point of length {self.spec.dim}, got shape {x.shape}"
            )
        return float(self._core(x) + self.f_opt)

    def to_record(self) -> dict:
        """Serializable description sufficient to reproduce the instance."""
        return {
            "function_id": self.spec.function_id,
            "instance_id": self.spec.instance_id,
            "dim": self.spec.dim,
            "x_opt": [float(v) for v in self.x_opt],
            "f_opt": float(self.f_opt),
            "rotation_seed": self.spec.instance_id,
        }

    def __repr__(self):
        s = self.spec
        return f"ProblemInstance(f{s.function_id}, instance {s.instance_id}, d={s.dim})"


def training_subset() -> list[int]:
    """Function ids used to score candidates during the search phase."""
    return list(_TRAINING_SUBSET)


def implemented_functions() -> list[int]:
    return sorted(_FUNCTION_NAMES)


def function_name(function_id: int) -> str:
    try:
        return _FUNCTION_NAMES[function_id]
    except KeyError:
        raise UnknownFunction(f"function id {function_id} is not implemented") from None


# ---------------------------------------------------------------------------
# Coordinate transforms shared by the cores
# ---------------------------------------------------------------------------


def _t_osz(v):
    """Oscillation transform; leaves zeros in place, preserves sign."""
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    nz = v != 0.0
    xhat = np.zeros_like(v)
    xhat[nz] = np.log(np.abs(v[nz]))
    sign = np.sign(v)
    c1 = np.where(v > 0.0, 10.0, 5.5)
    c2 = np.where(v > 0.0, 7.9, 3.1)
    out[nz] = (
        sign[nz]
        * np.exp(xhat[nz] + 0.049 * (np.sin(c1[nz] * xhat[nz]) + np.sin(c2[nz] * xhat[nz])))
    )
    return out


def _t_osz_scalar(s: float) -> float:
    return float(_t_osz(np.array([s]))[0])


def _t_asy(v, beta: float):
    """Asymmetry transform; raises positive coordinates to a growing power."""
    v = np.asarray(v, dtype=float)
    d = v.size
    expo = 1.0 + beta * np.linspace(0.0, 1.0, d) * np.sqrt(np.maximum(v, 0.0))
    return np.where(v > 0.0, np.power(np.maximum(v, 0.0), expo), v)


def _lambda_alpha(alpha: float, d: int):
    """Diagonal of the conditioning matrix: alpha^(0.5*i/(d-1))."""
    return np.power(alpha, 0.5 * np.linspace(0.0, 1.0, d))


def _f_pen(x):
    """Boundary penalty; zero everywhere inside the box."""
    return float(np.sum(np.maximum(0.0, np.abs(x) - 5.0) ** 2))


def _orthogonal_matrix(dim: int, seed_key) -> np.ndarray:
    """Seeded orthogonal matrix via Gram-Schmidt on a standard-normal draw.

    A second projection pass keeps ||R^T R - I|| near machine precision.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed_key))
    while True:
        a = rng.standard_normal((dim, dim))
        q = np.empty_like(a)
        ok = True
        for i in range(dim):
            v = a[i].copy()
            for _ in range(2):
                for j in range(i):
                    v -= (v @ q[j]) * q[j]
            norm = np.linalg.norm(v)
            if norm < 1e-10:
                ok = False
                break
            q[i] = v / norm
        if ok:
            return q


# ---------------------------------------------------------------------------
# Core builders, one per function id
# ---------------------------------------------------------------------------
# Every core is nonnegative over the box and exactly zero at x_opt, so
# evaluate(x) = core(x) + f_opt attains its minimum f_opt at x_opt.


def _core_sphere(d, x_opt, R, Q, rng):
    def core(x):
        z = x - x_opt
        return float(z @ z)

    return core


def _core_ellipsoid(d, x_opt, R, Q, rng):
    coef = np.power(10.0, 6.0 * np.linspace(0.0, 1.0, d))

    def core(x):
        z = _t_osz(x - x_opt)
        return float(coef @ (z * z))

    return core


def _core_buche_rastrigin(d, x_opt, R, Q, rng):
    s_base = np.power(10.0, 0.5 * np.linspace(0.0, 1.0, d))
    even = np.zeros(d, dtype=bool)
    even[0::2] = True

    def core(x):
        y = _t_osz(x - x_opt)
        s = s_base.copy()
        s[even & (y > 0.0)] *= 10.0
        z = s * y
        value = 10.0 * (d - np.sum(np.cos(2.0 * np.pi * z))) + z @ z
        return float(value + 100.0 * _f_pen(x))

    return core


def _core_attractive_sector(d, x_opt, R, Q, rng):
    m = Q @ (np.diag(_lambda_alpha(10.0, d)) @ R)

    def core(x):
        z = m @ (x - x_opt)
        s = np.where(z * x_opt > 0.0, 100.0, 1.0)
        return float(_t_osz_scalar(float(np.sum((s * z) ** 2))) ** 0.9)

    return core


def _core_rosenbrock(d, x_opt, R, Q, rng):
    gamma = max(1.0, np.sqrt(d) / 8.0)

    def core(x):
        z = gamma * (x - x_opt) + 1.0
        return float(
            np.sum(100.0 * (z[:-1] ** 2 - z[1:]) ** 2 + (z[:-1] - 1.0) ** 2)
        )

    return core


def _core_bent_cigar(d, x_opt, R, Q, rng):
    coef = np.full(d, 1e6)
    coef[0] = 1.0

    def core(x):
        z = R @ _t_asy(R @ (x - x_opt), 0.5)
        return float(coef @ (z * z))

    return core


def _core_different_powers(d, x_opt, R, Q, rng):
    expo = 2.0 + 4.0 * np.linspace(0.0, 1.0, d)

    def core(x):
        z = R @ (x - x_opt)
        return float(np.sqrt(np.sum(np.abs(z) ** expo)))

    return core


def _core_rastrigin_rotated(d, x_opt, R, Q, rng):
    m = R @ (np.diag(_lambda_alpha(10.0, d)) @ Q)

    def core(x):
        z = m @ _t_asy(_t_osz(R @ (x - x_opt)), 0.2)
        return float(10.0 * (d - np.sum(np.cos(2.0 * np.pi * z))) + z @ z)

    return core


def _core_schaffers_f7(d, x_opt, R, Q, rng):
    lam = _lambda_alpha(1000.0, d)

    def core(x):
        z = lam * (Q @ _t_asy(R @ (x - x_opt), 0.5))
        s = np.sqrt(z[:-1] ** 2 + z[1:] ** 2)
        mean_term = np.mean(np.sqrt(s) * (1.0 + np.sin(50.0 * s**0.2) ** 2))
        return float(mean_term**2 + 10.0 * _f_pen(x))

    return core


def _core_gallagher(d, x_opt, R, Q, rng):
    n_peaks = 101
    weights = np.empty(n_peaks)
    weights[0] = 10.0
    weights[1:] = np.linspace(1.1, 9.1, n_peaks - 1)
    conditions = np.empty(n_peaks)
    conditions[0] = np.sqrt(1000.0)
    conditions[1:] = rng.permutation(np.power(1000.0, np.linspace(0.0, 1.0, n_peaks - 1)))
    base = np.linspace(-0.5, 0.5, d)
    scales = np.empty((n_peaks, d))
    for i in range(n_peaks):
        scales[i] = rng.permutation(np.power(conditions[i], base))
    # Peak centers live in the rotated frame; peak 0 sits at R @ x_opt so the
    # global optimum of the core is exactly x_opt.
    centers = rng.uniform(-4.9, 4.9, size=(n_peaks, d))
    centers[0] = R @ x_opt

    def core(x):
        y = R @ x
        diff = y - centers
        peak_vals = weights * np.exp(-np.sum(scales * diff * diff, axis=1) / (2.0 * d))
        return float(_t_osz_scalar(10.0 - float(np.max(peak_vals))) ** 2 + _f_pen(x))

    return core


def _core_katsuura(d, x_opt, R, Q, rng):
    m = Q @ (np.diag(_lambda_alpha(100.0, d)) @ R)
    two_pows = np.power(2.0, np.arange(1, 33))
    idx = np.arange(1, d + 1)

    def core(x):
        z = m @ (x - x_opt)
        arr = np.outer(z, two_pows)
        inner = np.sum(np.abs(arr - np.round(arr)) / two_pows, axis=1)
        prod = np.prod(np.power(1.0 + idx * inner, 10.0 / d**1.2))
        return float(10.0 / d**2 * (prod - 1.0) + _f_pen(x))

    return core


_CORE_BUILDERS = {
    1: _core_sphere,
    2: _core_ellipsoid,
    4: _core_buche_rastrigin,
    6: _core_attractive_sector,
    8: _core_rosenbrock,
    12: _core_bent_cigar,
    14: _core_different_powers,
    15: _core_rastrigin_rotated,
    18: _core_schaffers_f7,
    21: _core_gallagher,
    23: _core_katsuura,
}

# Functions whose core applies an orthogonal rotation.
_USES_ROTATION = {6, 12, 14, 15, 18, 21, 23}


def make_instance(spec: ProblemSpec) -> ProblemInstance:
    """Build the deterministic instance identified by ``spec``.

    Instance 0 is the identity instance: x_opt = 0, f_opt = 0, identity
    rotations.  Other instances draw x_opt uniform in [-4, 4]^dim and
    f_opt uniform in [-100, 100] from a generator keyed by
    (function_id, instance_id); rotations come from per-instance seeded
    Gram-Schmidt draws.
    """
    fid, iid, d = spec.function_id, spec.instance_id, spec.dim
    if fid not in _CORE_BUILDERS:
        raise UnknownFunction(
            f"function id {fid} is not implemented; available: {implemented_functions()}"
        )
    if d < 2:
        raise InvalidDim(f"dim must be >= 2, got {d}")
    if iid < 0:
        raise ValueError(f"instance_id must be >= 0, got {iid}")

    if iid == 0:
        x_opt = np.zeros(d)
        f_opt = 0.0
        rot = np.eye(d)
        rot2 = np.eye(d)
    else:
        rng = np.random.default_rng(np.random.SeedSequence([fid, iid]))
        x_opt = rng.uniform(-4.0, 4.0, size=d)
        f_opt = float(rng.uniform(-100.0, 100.0))
        if fid in _USES_ROTATION:
            rot = _orthogonal_matrix(d, [fid, iid, 1])
            rot2 = _orthogonal_matrix(d, [fid, iid, 2])
        else:
            rot = np.eye(d)
            rot2 = np.eye(d)
    if fid == 4:
        # The asymmetric +/-10 scaling of every other coordinate assumes the
        # optimum has nonnegative entries there; mirror them so the minimum
        # stays at x_opt.
        x_opt = x_opt.copy()
        x_opt[0::2] = np.abs(x_opt[0::2])

    rng_aux = np.random.default_rng(np.random.SeedSequence([fid, iid, 3]))
    core = _CORE_BUILDERS[fid](d, x_opt, rot, rot2, rng_aux)
    return ProblemInstance(
        spec=spec,
        x_opt=x_opt,
        f_opt=f_opt,
        rotation=rot,
        rotation2=rot2,
        core=core,
        pure_shift=fid in _PURE_SHIFT,
    )
