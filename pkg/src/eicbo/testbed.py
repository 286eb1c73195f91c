"""Analytic test objectives, standardized for maximization on the unit cube.

Each objective is the classical test surface negated (so the task is
maximization), shifted and scaled by fixed printed constants.  Algorithms
work in unit coordinates u in [0, 1]^d; ``evaluate`` maps affinely onto the
native box before calling the surface.

Sign convention: every surface below has its stated maximum at
``optimum_point`` with value ``optimum_value``, up to rounding slack of 1e-2
in the published constants.  In particular the exponential-cosine term of
the Ackley surface enters with a plus sign so that the maximum at the origin
is exactly 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import ConsistencyError

__all__ = [
    "TestFunction",
    "FUNCTION_IDS",
    "get_function",
    "standardized",
    "evaluate",
    "evaluate_batch",
    "observe",
    "instantaneous_regret",
]

# Declared optima are published to ~4 digits; a true value may exceed the
# declared optimum by at most this much before it is treated as an error.
ROUNDING_SLACK = 1e-2


@dataclass(frozen=True)
class TestFunction:
    """A maximization objective on a rectangular native domain.

    ``surface`` maps an (m, dim) array of native-coordinate rows to m values.
    External objectives plug into the harness through this same interface.
    """

    __test__ = False  # keep pytest from collecting this as a test case

    function_id: str
    dim: int
    lower: np.ndarray
    upper: np.ndarray
    optimum_point: np.ndarray
    optimum_value: float
    surface: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.dim,)).copy()
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.dim,)).copy()
        if np.any(upper <= lower):
            raise ValueError("upper bounds must exceed lower bounds")
        opt = np.asarray(self.optimum_point, dtype=float).reshape(-1)
        if opt.size != self.dim:
            raise ValueError("optimum_point dimension mismatch")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "optimum_point", opt)

    @property
    def unit_optimum(self) -> np.ndarray:
        return (self.optimum_point - self.lower) / (self.upper - self.lower)


def _schwefel2(X: np.ndarray) -> np.ndarray:
    W = 500.0 * X
    raw = 418.9829 * 2 - np.sum(W * np.sin(np.sqrt(np.abs(W))), axis=1) - 838.57
    return -raw / 274.3


def _eggholder2(X: np.ndarray) -> np.ndarray:
    W = 512.0 * X
    w1, w2 = W[:, 0], W[:, 1]
    raw = (
        -(w2 + 47.0) * np.sin(np.sqrt(np.abs(w2 + 0.5 * w1 + 47.0)))
        - w1 * np.sin(np.sqrt(np.abs(w1 - (w2 + 47.0))))
        - 1.96
    )
    return -raw / 347.31


def _ackley2(X: np.ndarray) -> np.ndarray:
    sq = np.sum(np.square(X), axis=1)
    cs = np.sum(np.cos(2.0 * math.pi * X), axis=1)
    return (
        20.0 * np.exp(-0.2 * np.sqrt(0.5 * sq))
        + np.exp(0.5 * cs)
        - 20.0
        - math.e
    )


def _levy4(X: np.ndarray) -> np.ndarray:
    W = 1.0 + (X - 1.0) / 4.0
    head = np.square(np.sin(math.pi * W[:, 0]))
    mid = np.sum(
        np.square(W[:, :3] - 1.0) * (1.0 + 10.0 * np.square(np.sin(math.pi * W[:, :3] + 1.0))),
        axis=1,
    )
    tail = np.square(W[:, 3] - 1.0) * (1.0 + np.square(np.sin(2.0 * math.pi * W[:, 3])))
    raw = head + mid + tail - 42.55
    return -raw / 27.9


def _griewank6(X: np.ndarray) -> np.ndarray:
    idx = np.sqrt(np.arange(1, X.shape[1] + 1, dtype=float))
    raw = np.sum(np.square(X), axis=1) / 4000.0 - np.prod(np.cos(X / idx), axis=1) + 1.0 - 2.25
    return -raw / 0.47


_HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_HARTMANN_P = 1e-4 * np.array(
    [
        [1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0],
        [2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0],
        [2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0],
        [4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0],
    ]
)


def _hartmann6(X: np.ndarray) -> np.ndarray:
    # (m, 4, 6) squared deviations against the four Hartmann centers
    dev = np.square(X[:, None, :] - _HARTMANN_P[None, :, :])
    inner = np.einsum("ij,mij->mi", _HARTMANN_A, dev)
    raw = -np.exp(-inner) @ _HARTMANN_ALPHA + 0.26
    return -raw / 0.38


_REGISTRY: dict[str, TestFunction] = {}


def _register(fn: TestFunction) -> None:
    _REGISTRY[fn.function_id] = fn


_register(
    TestFunction(
        "schwefel2", 2, -1.0, 1.0, np.array([0.8419, 0.8419]), 3.057, _schwefel2
    )
)
# Native box chosen as [-1, 1] so w = 512 x spans the classical Eggholder
# domain; on any wider box the surface exceeds the declared optimum.
_register(
    TestFunction(
        "eggholder2", 2, -1.0, 1.0, np.array([1.0, 0.7895]), 2.769, _eggholder2
    )
)
_register(
    TestFunction(
        "ackley2", 2, -32.768, 32.768, np.array([0.0, 0.0]), 0.0, _ackley2
    )
)
_register(
    TestFunction(
        "levy4", 4, -10.0, 10.0, np.array([1.0, 1.0, 1.0, 1.0]), 1.525, _levy4
    )
)
_register(
    TestFunction(
        "griewank6", 6, -50.0, 50.0, np.zeros(6), 4.787, _griewank6
    )
)
_register(
    TestFunction(
        "hartmann6",
        6,
        0.0,
        1.0,
        np.array([0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573]),
        8.059,
        _hartmann6,
    )
)

FUNCTION_IDS = tuple(_REGISTRY)


def get_function(function_id: str) -> TestFunction:
    try:
        return _REGISTRY[function_id]
    except KeyError:
        raise ValueError(
            f"unknown function {function_id!r}; choose from {sorted(_REGISTRY)}"
        ) from None


# Domain mean and standard deviation of each surface under uniform sampling.
# Five surfaces bake these into their defining constants already (their
# moments come out as (0, 1) to the published precision); the Ackley surface
# does not, so its moments are frozen here from a 2e7-point Monte-Carlo
# estimate.  The benchmark optimizes the standardized surface.
_DOMAIN_MOMENTS = {"ackley2": (-20.185, 2.379)}


def standardized(fn: TestFunction) -> TestFunction:
    """Copy of ``fn`` rescaled so its values have mean 0 and variance 1 over
    the domain.  Returns ``fn`` itself when it is already standardized."""
    mean, sd = _DOMAIN_MOMENTS.get(fn.function_id, (0.0, 1.0))
    if mean == 0.0 and sd == 1.0:
        return fn
    surface = fn.surface

    def scaled(native: np.ndarray) -> np.ndarray:
        return (surface(native) - mean) / sd

    return replace(fn, surface=scaled, optimum_value=(fn.optimum_value - mean) / sd)


def to_native(fn: TestFunction, U) -> np.ndarray:
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape[1] != fn.dim:
        raise ValueError(f"points have dimension {U.shape[1]}, expected {fn.dim}")
    return fn.lower + (fn.upper - fn.lower) * U


def evaluate_batch(fn: TestFunction, U) -> np.ndarray:
    """True objective values at unit-coordinate rows of U."""
    return np.asarray(fn.surface(to_native(fn, U)), dtype=float)


def evaluate(fn: TestFunction, u) -> float:
    """True objective value at a single unit-coordinate point."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != fn.dim:
        raise ValueError(f"point has dimension {u.size}, expected {fn.dim}")
    return float(evaluate_batch(fn, u[None, :])[0])


def observe(fn: TestFunction, u, noise_sd: float, rng: np.random.Generator) -> float:
    """One noisy observation: evaluate(u) + noise_sd * standard normal draw."""
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    value = evaluate(fn, u)
    if noise_sd == 0:
        return value
    return value + noise_sd * float(rng.standard_normal())


def instantaneous_regret(fn: TestFunction, u) -> float:
    """optimum_value - evaluate(u), clamped at zero when the published
    optimum is exceeded by no more than rounding slack."""
    return regret_from_value(fn, evaluate(fn, u))


def regret_from_value(fn: TestFunction, value: float) -> float:
    gap = fn.optimum_value - value
    if gap < -ROUNDING_SLACK:
        raise ConsistencyError(
            f"{fn.function_id}: value {value} exceeds declared optimum "
            f"{fn.optimum_value} by more than {ROUNDING_SLACK}"
        )
    return max(gap, 0.0)
