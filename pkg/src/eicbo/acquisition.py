"""Acquisition criteria and the bookkeeping they act on.

Everything here scores points on the unit cube given a GP posterior: expected
improvement, the opportunity cost of spending one of the remaining
evaluations, upper confidence bounds, and Thompson draws.  The observation
ledger tracks replications per distinct point so the incumbent can be an
upper confidence value on a sample mean rather than a single noisy draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize
from scipy.special import ndtr

from .errors import InvalidStateError, NumericFailure
from .gp import GpPosterior, kernel_cross, kernel_matrix, predict_many, _chol_with_jitter

__all__ = [
    "ObservationLedger",
    "IncumbentResult",
    "AcquisitionContext",
    "OptimizerEffort",
    "MaximizeResult",
    "incumbent_value",
    "ei_value",
    "evaluation_cost",
    "decision_threshold",
    "approx_decision_threshold",
    "ucb_value",
    "ucb_beta",
    "ts_draw",
    "maximize_acquisition",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _phi(z):
    return np.exp(-0.5 * np.square(z)) / _SQRT_2PI


class ObservationLedger:
    """Replication ledger: one row per distinct evaluated point.

    Rows are keyed on exact coordinates; re-adding a point updates its count
    and running sample mean instead of appending.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self._points: list[np.ndarray] = []
        self._counts: list[int] = []
        self._means: list[float] = []
        self._index: dict[bytes, int] = {}

    def __len__(self) -> int:
        return len(self._points)

    @property
    def total_observations(self) -> int:
        return int(sum(self._counts))

    @property
    def unique_points(self) -> np.ndarray:
        if not self._points:
            return np.zeros((0, self.dim))
        return np.array(self._points)

    @property
    def rep_counts(self) -> np.ndarray:
        return np.array(self._counts, dtype=int)

    @property
    def sample_means(self) -> np.ndarray:
        return np.array(self._means, dtype=float)

    def add(self, point, y: float) -> int:
        """Record one observation of ``point``; returns its row index."""
        p = np.asarray(point, dtype=float).reshape(-1)
        if p.size != self.dim:
            raise ValueError(f"point has dimension {p.size}, ledger expects {self.dim}")
        key = p.tobytes()
        idx = self._index.get(key)
        if idx is None:
            idx = len(self._points)
            self._points.append(p.copy())
            self._counts.append(1)
            self._means.append(float(y))
            self._index[key] = idx
        else:
            self._counts[idx] += 1
            self._means[idx] += (float(y) - self._means[idx]) / self._counts[idx]
        return idx

    @classmethod
    def from_arrays(cls, points, counts, means) -> "ObservationLedger":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        ledger = cls(points.shape[1])
        for p, t, m in zip(points, counts, means):
            key = np.asarray(p, dtype=float).tobytes()
            if key in ledger._index:
                raise ValueError("duplicate row in ledger construction")
            ledger._index[key] = len(ledger._points)
            ledger._points.append(np.asarray(p, dtype=float).copy())
            ledger._counts.append(int(t))
            ledger._means.append(float(m))
        return ledger


class IncumbentResult(NamedTuple):
    value: float
    index: int


def incumbent_value(ledger: ObservationLedger, b: float, noise_sd: float) -> IncumbentResult:
    """Incumbent as the best upper confidence value over ledger rows:
    max_i  mean_i + b * noise_sd / sqrt(count_i).  Returns the max and its
    (lowest) argmax index."""
    if len(ledger) == 0:
        raise InvalidStateError("incumbent undefined on an empty ledger")
    if b < 0:
        raise ValueError(f"confidence multiplier b must be >= 0, got {b}")
    upper = ledger.sample_means + b * noise_sd / np.sqrt(ledger.rep_counts)
    idx = int(np.argmax(upper))
    return IncumbentResult(float(upper[idx]), idx)


def ei_value(mean, sd, incumbent: float):
    """Expected improvement of N(mean, sd^2) over the incumbent.

    (mean - xi) * Phi(z) + sd * phi(z) with z = (mean - xi) / sd; for sd = 0
    this degenerates to max(mean - xi, 0).  Vectorizes over mean/sd.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if np.any(sd < 0):
        raise ValueError("sd must be >= 0")
    diff = mean - incumbent
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, diff / np.where(sd > 0, sd, 1.0), 0.0)
        ei = np.where(sd > 0, diff * ndtr(z) + sd * _phi(z), np.maximum(diff, 0.0))
    if ei.ndim == 0:
        return float(ei)
    return ei


@dataclass(frozen=True)
class AcquisitionContext:
    """What the cost of one evaluation depends on: the incumbent, the total
    budget N, the current count n of spent evaluations, and the confidence
    multiplier used for the incumbent."""

    incumbent: float
    budget: int
    iteration: int
    confidence_b: float

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.iteration >= self.budget:
            raise InvalidStateError(
                f"iteration {self.iteration} leaves no remaining budget of {self.budget}"
            )

    @property
    def remaining(self) -> int:
        return self.budget - self.iteration


def evaluation_cost(mean, sd, ctx: AcquisitionContext):
    """Expected shortfall of one evaluation relative to the incumbent,
    amortized over the remaining budget:

        [(xi - mean) * Phi(w) + sd * phi(w)] / (N - n),  w = (xi - mean) / sd

    For sd = 0 this is max(xi - mean, 0) / (N - n).  Vectorizes over mean/sd.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if np.any(sd < 0):
        raise ValueError("sd must be >= 0")
    gap = ctx.incumbent - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(sd > 0, gap / np.where(sd > 0, sd, 1.0), 0.0)
        shortfall = np.where(sd > 0, gap * ndtr(w) + sd * _phi(w), np.maximum(gap, 0.0))
    cost = shortfall / ctx.remaining
    if cost.ndim == 0:
        return float(cost)
    return cost


def decision_threshold(budget: int) -> float:
    """Unique negative root z* of

        g(z) = (N - 1) * [z * Phi(z) + phi(z)] + z,   N = budget,

    located by bisection to 1e-10.  Standardized improvements above z* are
    exactly the ones whose expected improvement covers an evaluation cost
    normalized by N."""
    if budget < 3:
        raise ValueError(f"budget must be >= 3, got {budget}")
    n1 = budget - 1.0

    def g(z: float) -> float:
        return n1 * (z * ndtr(z) + _phi(z)) + z

    lo = -10.0 * math.sqrt(math.log(budget))
    hi = 0.0
    if not (g(lo) < 0 < g(hi)):
        raise NumericFailure(f"threshold bracket failed for budget {budget}")
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def approx_decision_threshold(budget: int) -> float:
    """Closed-form large-budget approximation of :func:`decision_threshold`:

        z* ~ -sqrt(2 log N') + 3 (log log N' + log 2) / (2 sqrt(2 log N')),

    with N' = (N - 1) / sqrt(2 pi)."""
    if budget < 3:
        raise ValueError(f"budget must be >= 3, got {budget}")
    n_prime = (budget - 1.0) / _SQRT_2PI
    root = math.sqrt(2.0 * math.log(n_prime))
    return -root + 3.0 * (math.log(math.log(n_prime)) + math.log(2.0)) / (2.0 * root)


def ucb_value(mean, sd, beta: float):
    """Upper confidence bound mean + sqrt(beta) * sd."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    out = np.asarray(mean, dtype=float) + math.sqrt(beta) * np.asarray(sd, dtype=float)
    if out.ndim == 0:
        return float(out)
    return out


def ucb_beta(n: int, delta: float = 0.1) -> float:
    """Confidence schedule beta_n = 2 log(pi^2 n^2 / (6 delta))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    return 2.0 * math.log(math.pi**2 * n**2 / (6.0 * delta))


def ts_draw(model: GpPosterior, candidates, rng: np.random.Generator) -> int:
    """Index of the argmax of one joint posterior sample over the candidate
    rows.  Ties break to the lowest index; the draw consumes exactly one
    standard-normal vector from ``rng``."""
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    m = candidates.shape[0]
    if m == 0:
        raise ValueError("candidate set is empty")
    spec = model.kernel
    if model.n == 0:
        mean = np.zeros(m)
        cov = kernel_matrix(candidates, spec)
    else:
        Ks = kernel_cross(candidates, model.inputs, spec)
        mean = Ks @ model.alpha
        V = solve_triangular(model.factor, Ks.T, lower=True, check_finite=False)
        cov = kernel_matrix(candidates, spec) - V.T @ V
    L, _ = _chol_with_jitter(cov, spec.tau_sq)
    sample = mean + L @ rng.standard_normal(m)
    return int(np.argmax(sample))


@dataclass(frozen=True)
class OptimizerEffort:
    """Budget knobs for the inner acquisition maximizer."""

    n_candidates: int = 1000
    n_starts: int = 5
    max_iters: int = 200

    def __post_init__(self):
        if self.n_candidates < 1 or self.n_starts < 0 or self.max_iters < 1:
            raise ValueError("effort parameters out of range")


@dataclass(frozen=True)
class MaximizeResult:
    point: np.ndarray
    value: float
    ranked_points: np.ndarray = field(repr=False, default=None)
    ranked_values: np.ndarray = field(repr=False, default=None)


def maximize_acquisition(
    score: Callable[[np.ndarray], np.ndarray],
    dim: int,
    rng: np.random.Generator,
    effort: OptimizerEffort = OptimizerEffort(),
    anchors: np.ndarray | None = None,
) -> MaximizeResult:
    """Approximately maximize ``score`` over the unit cube [0, 1]^dim.

    ``score`` maps an (m, dim) array of rows to m values.  The maximizer
    scores ``effort.n_candidates`` uniform points plus any ``anchors``
    (previously evaluated points), then polishes the best ``effort.n_starts``
    by Nelder-Mead with coordinates clamped to the cube.  The returned value
    never falls below the best raw candidate; a refinement that lands on a
    non-finite score falls back to the best finite candidate.

    ``ranked_points`` carries the best candidates in descending score order
    for callers that need runner-up choices.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    pool = rng.uniform(size=(effort.n_candidates, dim))
    if anchors is not None:
        anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
        if anchors.size and anchors.shape[1] != dim:
            raise ValueError(f"anchors have dimension {anchors.shape[1]}, expected {dim}")
        if anchors.size:
            pool = np.vstack([pool, anchors])
    values = np.asarray(score(pool), dtype=float).reshape(-1)
    if values.shape[0] != pool.shape[0]:
        raise ValueError("score returned wrong number of values")
    finite = np.isfinite(values)
    if not finite.any():
        raise NumericFailure("acquisition score non-finite at every candidate")
    ranked = np.where(finite, values, -np.inf)
    order = np.argsort(-ranked, kind="stable")
    best_x = pool[order[0]].copy()
    best_v = float(ranked[order[0]])

    def negated(x: np.ndarray) -> float:
        v = float(np.asarray(score(np.clip(x, 0.0, 1.0)[None, :])).reshape(-1)[0])
        return -v if np.isfinite(v) else np.inf

    for start in pool[order[: effort.n_starts]]:
        result = minimize(
            negated,
            start,
            method="Nelder-Mead",
            options={"maxiter": effort.max_iters, "xatol": 1e-4, "fatol": 1e-10},
        )
        x = np.clip(result.x, 0.0, 1.0)
        v = float(np.asarray(score(x[None, :])).reshape(-1)[0])
        if np.isfinite(v) and v > best_v:
            best_x, best_v = x, v
    keep = order[: min(order.size, 32)]
    return MaximizeResult(best_x, best_v, pool[keep].copy(), ranked[keep].copy())
