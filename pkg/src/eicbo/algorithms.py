"""Sequential design algorithms for cumulative-regret maximization.

The main loop alternates between two decisions: EXPLORE a new point when the
expected improvement at the inner maximizer covers the amortized cost of
spending one of the remaining evaluations, and otherwise RESAMPLE the ledger
point with the best upper confidence value.  Baselines share the same trial
harness: traditional expected improvement (the same loop with the cost test
removed), an improvement rule with a small fixed exploration threshold, an
upper-confidence-bound rule, and Thompson sampling over a fresh candidate
set each round.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from .acquisition import (
    AcquisitionContext,
    ObservationLedger,
    OptimizerEffort,
    ei_value,
    evaluation_cost,
    incumbent_value,
    maximize_acquisition,
    ts_draw,
    ucb_beta,
    ucb_value,
)
from .errors import InvalidStateError, ResourceLimitError
from .gp import (
    GpPosterior,
    HyperparameterBounds,
    KernelSpec,
    estimate_hyperparameters,
    fit_posterior,
    predict_many,
)
from .testbed import TestFunction, evaluate, observe, regret_from_value

__all__ = [
    "ALGORITHM_IDS",
    "MODE_INIT",
    "MODE_EXPLORE",
    "MODE_RESAMPLE",
    "SurrogateConfig",
    "StepOptions",
    "AlgorithmState",
    "StepDecision",
    "RegretTrace",
    "initial_design",
    "initial_points",
    "choose_initial_M",
    "confidence_multiplier",
    "eic_step",
    "baseline_step",
    "run_trial",
    "derive_seed",
]

ALGORITHM_IDS = ("eic", "ei", "ei_nguyen", "gp_ucb", "gp_ts")

MODE_INIT = "init"
MODE_EXPLORE = "explore"
MODE_RESAMPLE = "resample"

# Hard cap on generated design sizes.
MAX_DESIGN_POINTS = 1_000_000

# How many runner-up candidates the explore branch retests before resampling.
FALLBACK_CANDIDATES = 20


@dataclass(frozen=True)
class SurrogateConfig:
    """How the GP hyperparameters are obtained within a trial.

    With ``estimate`` set, (tau_sq, length_scales) are fitted by maximum
    likelihood once after the initial design and then frozen;
    ``reestimate_interval`` = k > 0 refits every k adaptive iterations
    instead.  With ``estimate`` unset, ``kernel`` is used as-is.
    """

    kernel: KernelSpec | None = None
    estimate: bool = True
    bounds: HyperparameterBounds = field(default_factory=HyperparameterBounds)
    restarts: int = 10
    reestimate_interval: int = 0


@dataclass(frozen=True)
class StepOptions:
    """Knobs shared by the per-iteration decision rules."""

    effort: OptimizerEffort = field(default_factory=OptimizerEffort)
    # EI threshold below which the thresholded-EI baseline stops exploring.
    kappa: float = 1e-4
    ucb_delta: float = 0.1
    ts_candidates: int = 2000
    # None picks the per-algorithm default: upper-confidence ledger value for
    # "eic", best raw observation for the EI baselines.
    incumbent_rule: str | None = None


@dataclass
class AlgorithmState:
    """Everything a decision rule may look at in one iteration."""

    budget: int
    iteration: int
    ledger: ObservationLedger
    posterior: GpPosterior
    kernel: KernelSpec
    noise_sd: float
    confidence_b: float
    rng: np.random.Generator
    algorithm_id: str

    def __post_init__(self):
        if self.iteration != self.ledger.total_observations:
            raise InvalidStateError(
                f"iteration {self.iteration} disagrees with ledger total "
                f"{self.ledger.total_observations}"
            )
        if self.iteration > self.budget:
            raise InvalidStateError("ledger already exceeds the budget")


@dataclass(frozen=True)
class StepDecision:
    point: np.ndarray
    mode: str
    acquisition_value: float
    cost_value: float


@dataclass(frozen=True)
class RegretTrace:
    """Per-iteration record of one trial, initial design included."""

    algorithm_id: str
    function_id: str
    points: np.ndarray
    observations: np.ndarray
    true_values: np.ndarray
    regret: np.ndarray
    cum_regret: np.ndarray
    modes: tuple[str, ...]
    seed: int
    noise_seed: int
    n0: int

    def __len__(self) -> int:
        return self.points.shape[0]


def initial_design(M: int, dim: int) -> np.ndarray:
    """Centered M^dim lattice on the unit cube: coordinates (2k - 1) / (2M)
    for k = 1..M, rows in lexicographic order."""
    if M < 1 or dim < 1:
        raise ValueError(f"M and dim must be >= 1, got M={M}, dim={dim}")
    if M**dim > MAX_DESIGN_POINTS:
        raise ResourceLimitError(f"design of {M}^{dim} points exceeds cap {MAX_DESIGN_POINTS}")
    g = (2.0 * np.arange(1, M + 1) - 1.0) / (2.0 * M)
    mesh = np.meshgrid(*([g] * dim), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, dim)


def initial_points(n0: int, dim: int) -> np.ndarray:
    """Initial design of exactly n0 points.

    A perfect power n0 = M^dim gives the centered lattice; otherwise the
    largest full lattice is padded with midpoints of the next-finer lattice,
    chosen greedily by farthest distance from the design so far.
    """
    if n0 < 1 or dim < 1:
        raise ValueError(f"n0 and dim must be >= 1, got n0={n0}, dim={dim}")
    if n0 > MAX_DESIGN_POINTS:
        raise ResourceLimitError(f"n0={n0} exceeds cap {MAX_DESIGN_POINTS}")
    M = int(round(n0 ** (1.0 / dim)))
    if M >= 1 and M**dim == n0:
        return initial_design(M, dim)
    M = max(1, int(math.floor(n0 ** (1.0 / dim) + 1e-9)))
    while (M + 1) ** dim <= n0:
        M += 1
    base = initial_design(M, dim)
    remaining = n0 - base.shape[0]
    pool = initial_design(M + 1, dim)
    # squared distance from each pool midpoint to its nearest design point
    dist = np.min(
        np.sum((pool[:, None, :] - base[None, :, :]) ** 2, axis=2), axis=1
    )
    chosen = []
    for _ in range(remaining):
        idx = int(np.argmax(dist))
        chosen.append(idx)
        gap = np.sum((pool - pool[idx]) ** 2, axis=1)
        dist = np.minimum(dist, gap)
    return np.vstack([base, pool[chosen]])


def choose_initial_M(budget: int, dim: int, c0: float = 1.0) -> int:
    """Lattice resolution max(1, round(c0^(1/dim) * log(budget)))."""
    if budget < 2:
        raise ValueError("budget must be >= 2")
    if dim < 1 or c0 <= 0:
        raise ValueError("dim must be >= 1 and c0 > 0")
    return max(1, round(c0 ** (1.0 / dim) * math.log(budget)))


def confidence_multiplier(budget: int) -> float:
    """Incumbent confidence multiplier b = max(log log N, 1/2)."""
    if budget < 2:
        raise ValueError("budget must be >= 2")
    return max(math.log(math.log(budget)), 0.5)


def _incumbent(state: AlgorithmState, rule: str):
    if rule == "ucb":
        return incumbent_value(state.ledger, state.confidence_b, state.noise_sd)
    if rule == "best_observation":
        if state.posterior.n == 0:
            raise InvalidStateError("no observations to take an incumbent from")
        return float(np.max(state.posterior.observations))
    raise ValueError(f"unknown incumbent rule {rule!r}")


def _ei_score(state: AlgorithmState, xi: float):
    def score(P: np.ndarray) -> np.ndarray:
        mu, var = predict_many(state.posterior, P)
        return ei_value(mu, np.sqrt(var), xi)

    return score


def eic_step(state: AlgorithmState, options: StepOptions | None = None) -> StepDecision:
    """One cost-gated improvement decision.

    Maximizes expected improvement against the upper-confidence incumbent;
    explores the maximizer if its improvement covers the amortized
    evaluation cost, retests the runner-up candidates if not, and otherwise
    resamples the incumbent ledger point.
    """
    options = options or StepOptions()
    rule = options.incumbent_rule or "ucb"
    inc = _incumbent(state, rule)
    if rule == "ucb":
        xi, inc_index = inc.value, inc.index
    else:
        xi = inc
        inc_index = int(np.argmax(state.ledger.sample_means))
    ctx = AcquisitionContext(xi, state.budget, state.iteration, state.confidence_b)
    score = _ei_score(state, xi)
    result = maximize_acquisition(
        score, state.posterior.kernel.dim, state.rng, options.effort,
        anchors=state.ledger.unique_points,
    )

    def cost_at(P: np.ndarray) -> np.ndarray:
        mu, var = predict_many(state.posterior, P)
        return np.atleast_1d(evaluation_cost(mu, np.sqrt(var), ctx))

    cost_best = float(cost_at(result.point[None, :])[0])
    if result.value >= cost_best:
        return StepDecision(result.point, MODE_EXPLORE, result.value, cost_best)
    # Runner-up pass: the global maximizer failed the cost test, but a
    # lower-mean candidate can still clear its own (lower) cost.
    runners = result.ranked_points[1 : 1 + FALLBACK_CANDIDATES]
    if runners.shape[0]:
        ei_runners = result.ranked_values[1 : 1 + FALLBACK_CANDIDATES]
        cost_runners = cost_at(runners)
        ok = np.flatnonzero(np.isfinite(ei_runners) & (ei_runners >= cost_runners))
        if ok.size:
            j = int(ok[0])
            return StepDecision(
                runners[j].copy(), MODE_EXPLORE, float(ei_runners[j]), float(cost_runners[j])
            )
    point = state.ledger.unique_points[inc_index]
    mu, var = predict_many(state.posterior, point[None, :])
    sd = math.sqrt(float(var[0]))
    return StepDecision(
        point,
        MODE_RESAMPLE,
        float(ei_value(float(mu[0]), sd, xi)),
        float(evaluation_cost(float(mu[0]), sd, ctx)),
    )


def baseline_step(state: AlgorithmState, options: StepOptions | None = None) -> StepDecision:
    """One decision of the named baseline in ``state.algorithm_id``."""
    options = options or StepOptions()
    algo = state.algorithm_id
    dim = state.posterior.kernel.dim
    if algo in ("ei", "ei_nguyen"):
        rule = options.incumbent_rule or "best_observation"
        inc = _incumbent(state, rule)
        xi = inc.value if rule == "ucb" else inc
        result = maximize_acquisition(
            _ei_score(state, xi), dim, state.rng, options.effort,
            anchors=state.ledger.unique_points,
        )
        if algo == "ei" or result.value >= options.kappa:
            return StepDecision(result.point, MODE_EXPLORE, result.value, 0.0)
        idx = int(np.argmax(state.ledger.sample_means))
        return StepDecision(
            state.ledger.unique_points[idx], MODE_RESAMPLE, result.value, 0.0
        )
    if algo == "gp_ucb":
        beta = ucb_beta(state.iteration, options.ucb_delta)

        def score(P: np.ndarray) -> np.ndarray:
            mu, var = predict_many(state.posterior, P)
            return ucb_value(mu, np.sqrt(var), beta)

        result = maximize_acquisition(
            score, dim, state.rng, options.effort, anchors=state.ledger.unique_points
        )
        return StepDecision(result.point, MODE_EXPLORE, result.value, 0.0)
    if algo == "gp_ts":
        candidates = state.rng.uniform(size=(options.ts_candidates, dim))
        idx = ts_draw(state.posterior, candidates, state.rng)
        point = candidates[idx].copy()
        mu, _ = predict_many(state.posterior, point[None, :])
        return StepDecision(point, MODE_EXPLORE, float(mu[0]), 0.0)
    raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGORITHM_IDS}")


def derive_seed(*keys) -> int:
    """Stable child seed from integer/string keys (order-sensitive)."""
    parts = []
    for k in keys:
        parts.append(zlib.crc32(k.encode()) if isinstance(k, str) else int(k))
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def run_trial(
    algorithm_id: str,
    objective: TestFunction,
    noise_sd: float,
    budget: int,
    n0: int,
    surrogate: SurrogateConfig | None = None,
    seed: int = 0,
    noise_seed: int | None = None,
    options: StepOptions | None = None,
) -> RegretTrace:
    """Run one full trial of ``algorithm_id`` on ``objective``.

    Search randomness (candidate draws, estimation restarts, Thompson draws)
    comes from ``seed``; observation noise comes from the separate
    ``noise_seed`` stream so that trials of different algorithms can share
    identical noise histories.  ``noise_seed`` defaults to a value derived
    from ``seed``.
    """
    if algorithm_id not in ALGORITHM_IDS:
        raise ValueError(f"unknown algorithm {algorithm_id!r}; choose from {ALGORITHM_IDS}")
    if budget < n0:
        raise ValueError(f"budget {budget} is smaller than the initial design {n0}")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    surrogate = surrogate or SurrogateConfig()
    options = options or StepOptions()
    rng = np.random.default_rng(seed)
    if noise_seed is None:
        noise_seed = derive_seed(seed, "noise")
    noise_rng = np.random.default_rng(noise_seed)
    dim = objective.dim
    noise_var = noise_sd**2
    b = confidence_multiplier(budget) if budget >= 2 else 0.5

    design = initial_points(n0, dim)
    ledger = ObservationLedger(dim)
    xs: list[np.ndarray] = []
    ys: list[float] = []
    fs: list[float] = []
    modes: list[str] = []
    for u in design:
        y = observe(objective, u, noise_sd, noise_rng)
        xs.append(u)
        ys.append(y)
        fs.append(evaluate(objective, u))
        ledger.add(u, y)
        modes.append(MODE_INIT)

    def estimated_spec() -> KernelSpec:
        return estimate_hyperparameters(
            np.array(xs), np.array(ys), noise_var,
            bounds=surrogate.bounds, restarts=surrogate.restarts, rng=rng,
        )

    kernel = surrogate.kernel
    if budget > n0 and surrogate.estimate:
        if n0 >= 2:
            kernel = estimated_spec()
        elif kernel is None:
            raise ValueError("cannot estimate hyperparameters from fewer than 2 points")
    if budget > n0 and kernel is None:
        raise ValueError("surrogate needs a kernel when estimation is disabled")

    for n in range(n0, budget):
        k = surrogate.reestimate_interval
        if surrogate.estimate and k > 0 and n > n0 and (n - n0) % k == 0:
            kernel = estimated_spec()
        posterior = fit_posterior(np.array(xs), np.array(ys), noise_var, kernel)
        state = AlgorithmState(
            budget, n, ledger, posterior, kernel, noise_sd, b, rng, algorithm_id
        )
        decision = (
            eic_step(state, options) if algorithm_id == "eic" else baseline_step(state, options)
        )
        u = decision.point
        y = observe(objective, u, noise_sd, noise_rng)
        xs.append(u)
        ys.append(y)
        fs.append(evaluate(objective, u))
        ledger.add(u, y)
        modes.append(decision.mode)

    true_values = np.array(fs)
    regret = np.array([regret_from_value(objective, f) for f in fs])
    return RegretTrace(
        algorithm_id=algorithm_id,
        function_id=objective.function_id,
        points=np.array(xs),
        observations=np.array(ys),
        true_values=true_values,
        regret=regret,
        cum_regret=np.cumsum(regret),
        modes=tuple(modes),
        seed=int(seed),
        noise_seed=int(noise_seed),
        n0=int(n0),
    )
