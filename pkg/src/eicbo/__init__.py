"""Bayesian optimization for cumulative regret under observation noise.

The optimizer decides each round whether the expected improvement of a new
evaluation covers the opportunity cost of spending one of the remaining
budget, and resamples its incumbent otherwise.  Baselines, analytic test
objectives, and a benchmark harness with paired seeding live alongside it.
"""

__version__ = "0.1.0"

from .acquisition import (
    AcquisitionContext,
    ObservationLedger,
    OptimizerEffort,
    approx_decision_threshold,
    decision_threshold,
    ei_value,
    evaluation_cost,
    incumbent_value,
    maximize_acquisition,
    ts_draw,
    ucb_beta,
    ucb_value,
)
from .algorithms import (
    ALGORITHM_IDS,
    AlgorithmState,
    RegretTrace,
    StepDecision,
    StepOptions,
    SurrogateConfig,
    baseline_step,
    choose_initial_M,
    confidence_multiplier,
    derive_seed,
    eic_step,
    initial_design,
    initial_points,
    run_trial,
)
from .bench import (
    ExperimentConfig,
    ExperimentResult,
    config_from_mapping,
    regret_stats,
    replay_trial,
    run_experiment,
    write_results,
)
from .gp import (
    GpPosterior,
    HyperparameterBounds,
    KernelSpec,
    estimate_hyperparameters,
    fit_posterior,
    kernel_eval,
    kernel_matrix,
    log_marginal_likelihood,
    predict,
    predict_many,
)
from .testbed import (
    FUNCTION_IDS,
    TestFunction,
    evaluate,
    evaluate_batch,
    get_function,
    instantaneous_regret,
    observe,
    standardized,
)
