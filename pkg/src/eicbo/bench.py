"""Benchmark harness: paired trials, summary statistics, and file output.

A run writes, into one output directory,

    raw_<algo>_<function>.csv   per-iteration rows for every trial
    summary_<function>.csv      per-iteration mean and 95% CI per algorithm
    regret_<function>.svg       the summary as a figure
    manifest.json               config echo, code version, per-trial seeds

Seeds are derived from (base_seed, algorithm, trial) for the search stream
and (base_seed, "noise", trial) for the observation stream, so all
algorithms see identical noise histories on a given trial index and any
single trial can be reproduced in isolation from the manifest.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import __version__
from .acquisition import OptimizerEffort
from .algorithms import (
    ALGORITHM_IDS,
    RegretTrace,
    StepOptions,
    SurrogateConfig,
    derive_seed,
    run_trial,
)
from .gp import HyperparameterBounds, KernelSpec
from .plotting import save_regret_figure
from .testbed import get_function, standardized

__all__ = [
    "DEFAULT_N0",
    "ExperimentConfig",
    "ExperimentResult",
    "SummaryStats",
    "TrialFailure",
    "config_from_mapping",
    "regret_stats",
    "run_experiment",
    "write_results",
    "trace_rows",
    "replay_trial",
]

# Initial design sizes pinned by the benchmark protocol, per dimension.
DEFAULT_N0 = {2: 16, 4: 36, 6: 64}

# Budget beyond the initial design; the rugged 2-d surface gets twice the
# default because nothing converges within 200 steps there.
DEFAULT_BUDGET_EXTRA = 200
BUDGET_EXTRA_OVERRIDES = {"ackley2": 400}

NOISE_STREAM = "noise"


@dataclass(frozen=True)
class ExperimentConfig:
    function_id: str
    algorithm_ids: tuple[str, ...] = ALGORITHM_IDS
    trials: int = 100
    budget_extra: int | None = None
    n0: int | None = None
    noise_sd: float = 0.1
    base_seed: int = 0
    output_dir: str = "results"
    workers: int = 1
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)
    options: StepOptions = field(default_factory=StepOptions)

    def resolved_n0(self) -> int:
        if self.n0 is not None:
            return self.n0
        dim = get_function(self.function_id).dim
        if dim not in DEFAULT_N0:
            raise ValueError(f"no default initial design for dim {dim}; set n0")
        return DEFAULT_N0[dim]

    def resolved_budget_extra(self) -> int:
        if self.budget_extra is not None:
            return self.budget_extra
        return BUDGET_EXTRA_OVERRIDES.get(self.function_id, DEFAULT_BUDGET_EXTRA)

    def resolved_budget(self) -> int:
        return self.resolved_n0() + self.resolved_budget_extra()


class SummaryStats(NamedTuple):
    mean: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray


@dataclass(frozen=True)
class TrialFailure:
    algorithm_id: str
    trial: int
    error: str


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    traces: dict[str, list[RegretTrace | None]]
    stats: dict[str, SummaryStats]
    failures: list[TrialFailure]
    output_dir: Path
    manifest: dict

    @property
    def failure_fraction(self) -> float:
        total = len(self.config.algorithm_ids) * self.config.trials
        return len(self.failures) / total if total else 0.0


def regret_stats(traces) -> SummaryStats:
    """Per-iteration mean cumulative regret with a 95% normal CI
    (mean +- 1.96 * sd / sqrt(R)).  Needs at least two traces."""
    traces = list(traces)
    if len(traces) < 2:
        raise ValueError("confidence intervals need at least 2 traces")
    arr = np.vstack([t.cum_regret for t in traces])
    mean = arr.mean(axis=0)
    half = 1.96 * arr.std(axis=0, ddof=1) / np.sqrt(arr.shape[0])
    return SummaryStats(mean, mean - half, mean + half)


def _fmt(x: float) -> str:
    # repr of a Python float: shortest string that round-trips the double.
    return repr(float(x))


def trace_rows(trace: RegretTrace, trial: int) -> list[str]:
    """CSV lines (no newline) for one trial, matching the raw-file schema."""
    rows = []
    for i in range(len(trace)):
        cells = [str(trial), str(i), trace.modes[i]]
        cells += [_fmt(c) for c in trace.points[i]]
        cells += [
            _fmt(trace.observations[i]),
            _fmt(trace.true_values[i]),
            _fmt(trace.regret[i]),
            _fmt(trace.cum_regret[i]),
        ]
        rows.append(",".join(cells))
    return rows


def _raw_header(dim: int) -> str:
    coords = ",".join(f"x{i + 1}" for i in range(dim))
    return f"trial,iteration,mode,{coords},y,f,regret,cum_regret"


def _check_writable(directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    try:
        with tempfile.TemporaryFile(dir=directory):
            pass
    except OSError as exc:
        raise OSError(f"output directory {directory} is not writable: {exc}") from exc


def _trial_task(args) -> RegretTrace:
    (function_id, algorithm_id, noise_sd, budget, n0, surrogate, seed, noise_seed, options) = args
    return run_trial(
        algorithm_id,
        standardized(get_function(function_id)),
        noise_sd,
        budget,
        n0,
        surrogate=surrogate,
        seed=seed,
        noise_seed=noise_seed,
        options=options,
    )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run all (algorithm, trial) pairs of ``config`` and write results.

    Individual trial failures are recorded in the manifest and skipped in
    the statistics; remaining trials still run.  Raw rows are flushed per
    trial in trial order, so scheduling does not affect the output bytes.
    """
    fn = standardized(get_function(config.function_id))
    unknown = [a for a in config.algorithm_ids if a not in ALGORITHM_IDS]
    if unknown:
        raise ValueError(f"unknown algorithms {unknown}; choose from {ALGORITHM_IDS}")
    if config.trials < 1:
        raise ValueError("trials must be >= 1")
    out = Path(config.output_dir)
    _check_writable(out)
    n0 = config.resolved_n0()
    budget = config.resolved_budget()

    warnings: list[str] = []
    manifest = {
        "version": __version__,
        "function": config.function_id,
        "config": _config_to_jsonable(config),
        "resolved": {
            "n0": n0,
            "budget": budget,
            "dim": fn.dim,
            "optimum": fn.optimum_value,
        },
        "trials": [],
        "warnings": warnings,
    }
    if not config.algorithm_ids:
        warnings.append("no algorithms requested; nothing to run")
        _write_manifest(out, manifest)
        raise ValueError("algorithm list is empty")
    if config.trials == 1:
        warnings.append("single trial: summary statistics omitted (CI needs >= 2 trials)")

    seeds = {
        (algo, r): (
            derive_seed(config.base_seed, algo, r),
            derive_seed(config.base_seed, NOISE_STREAM, r),
        )
        for algo in config.algorithm_ids
        for r in range(config.trials)
    }

    def task_args(algo: str, r: int):
        seed, noise_seed = seeds[(algo, r)]
        return (
            config.function_id, algo, config.noise_sd, budget, n0,
            config.surrogate, seed, noise_seed, config.options,
        )

    results: dict[tuple[str, int], RegretTrace | BaseException] = {}
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = {
                (algo, r): pool.submit(_trial_task, task_args(algo, r))
                for algo in config.algorithm_ids
                for r in range(config.trials)
            }
        for key, fut in futures.items():
            exc = fut.exception()
            results[key] = exc if exc is not None else fut.result()
    else:
        for algo in config.algorithm_ids:
            for r in range(config.trials):
                try:
                    results[(algo, r)] = _trial_task(task_args(algo, r))
                except Exception as exc:
                    results[(algo, r)] = exc

    traces: dict[str, list[RegretTrace | None]] = {}
    failures: list[TrialFailure] = []
    for algo in config.algorithm_ids:
        algo_traces: list[RegretTrace | None] = []
        raw_path = out / f"raw_{algo}_{config.function_id}.csv"
        with open(raw_path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(_raw_header(fn.dim) + "\n")
            for r in range(config.trials):
                seed, noise_seed = seeds[(algo, r)]
                outcome = results[(algo, r)]
                entry = {
                    "algorithm": algo,
                    "trial": r,
                    "seed": seed,
                    "noise_seed": noise_seed,
                }
                if isinstance(outcome, BaseException):
                    entry["status"] = "failed"
                    entry["error"] = f"{type(outcome).__name__}: {outcome}"
                    failures.append(TrialFailure(algo, r, entry["error"]))
                    algo_traces.append(None)
                else:
                    entry["status"] = "ok"
                    for line in trace_rows(outcome, r):
                        fh.write(line + "\n")
                    fh.flush()
                    algo_traces.append(outcome)
                manifest["trials"].append(entry)
        traces[algo] = algo_traces

    stats: dict[str, SummaryStats] = {}
    for algo in config.algorithm_ids:
        good = [t for t in traces[algo] if t is not None]
        if len(good) >= 2:
            stats[algo] = regret_stats(good)
        elif config.trials > 1:
            warnings.append(f"{algo}: fewer than 2 successful trials, no summary")

    if stats:
        _write_summary(out / f"summary_{config.function_id}.csv", stats)
        save_regret_figure(
            out / f"regret_{config.function_id}.svg", stats, config.function_id
        )
    _write_manifest(out, manifest)
    return ExperimentResult(config, traces, stats, failures, out, manifest)


def _write_summary(path: Path, stats: dict[str, SummaryStats]) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("iteration,algo,mean,ci_low,ci_high\n")
        for algo, s in stats.items():
            for i in range(len(s.mean)):
                fh.write(
                    f"{i},{algo},{_fmt(s.mean[i])},{_fmt(s.ci_low[i])},{_fmt(s.ci_high[i])}\n"
                )


def _write_manifest(out: Path, manifest: dict) -> None:
    with open(out / "manifest.json", "w", newline="\n", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_results(traces: dict[str, list[RegretTrace]], stats, output_dir) -> None:
    """Write raw files, the summary, and the figure for already-run traces.

    ``run_experiment`` streams these files itself; this entry point covers
    programmatic use on traces produced by :func:`eicbo.algorithms.run_trial`.
    """
    out = Path(output_dir)
    _check_writable(out)
    function_id = None
    for algo, algo_traces in traces.items():
        good = [t for t in algo_traces if t is not None]
        if not good:
            continue
        function_id = good[0].function_id
        dim = good[0].points.shape[1]
        with open(out / f"raw_{algo}_{function_id}.csv", "w", newline="\n", encoding="utf-8") as fh:
            fh.write(_raw_header(dim) + "\n")
            for r, t in enumerate(algo_traces):
                if t is not None:
                    for line in trace_rows(t, r):
                        fh.write(line + "\n")
    if stats and function_id is not None:
        _write_summary(out / f"summary_{function_id}.csv", stats)
        save_regret_figure(out / f"regret_{function_id}.svg", stats, function_id)


def replay_trial(manifest_path, algorithm_id: str, trial: int) -> RegretTrace:
    """Re-run one trial exactly as recorded in a manifest."""
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    entry = next(
        (
            e
            for e in manifest["trials"]
            if e["algorithm"] == algorithm_id and e["trial"] == trial
        ),
        None,
    )
    if entry is None:
        raise ValueError(f"manifest has no trial {trial} for {algorithm_id!r}")
    cfg = manifest["config"]
    return run_trial(
        algorithm_id,
        standardized(get_function(manifest["function"])),
        cfg["noise_sd"],
        manifest["resolved"]["budget"],
        manifest["resolved"]["n0"],
        surrogate=_surrogate_from_dict(cfg["surrogate"]),
        seed=entry["seed"],
        noise_seed=entry["noise_seed"],
        options=_options_from_dict(cfg["options"]),
    )


def _config_to_jsonable(config: ExperimentConfig) -> dict:
    d = dataclasses.asdict(config)
    d["algorithm_ids"] = list(config.algorithm_ids)
    d["output_dir"] = str(config.output_dir)
    kernel = config.surrogate.kernel
    d["surrogate"]["kernel"] = (
        None
        if kernel is None
        else {"tau_sq": kernel.tau_sq, "length_scales": [float(v) for v in kernel.length_scales]}
    )
    d["surrogate"]["bounds"] = {
        "tau_sq": list(config.surrogate.bounds.tau_sq),
        "length_scale": list(config.surrogate.bounds.length_scale),
    }
    return d


def _surrogate_from_dict(d: dict) -> SurrogateConfig:
    kernel = d.get("kernel")
    bounds = d.get("bounds") or {}
    return SurrogateConfig(
        kernel=None
        if kernel is None
        else KernelSpec(kernel["tau_sq"], np.asarray(kernel["length_scales"])),
        estimate=d.get("estimate", True),
        bounds=HyperparameterBounds(
            tau_sq=tuple(bounds.get("tau_sq", (1e-3, 1e3))),
            length_scale=tuple(bounds.get("length_scale", (1e-2, 1e1))),
        ),
        restarts=d.get("restarts", 10),
        reestimate_interval=d.get("reestimate_interval", 0),
    )


def _options_from_dict(d: dict) -> StepOptions:
    effort = d.get("effort") or {}
    return StepOptions(
        effort=OptimizerEffort(
            n_candidates=effort.get("n_candidates", 1000),
            n_starts=effort.get("n_starts", 5),
            max_iters=effort.get("max_iters", 200),
        ),
        kappa=d.get("kappa", 1e-4),
        ucb_delta=d.get("ucb_delta", 0.1),
        ts_candidates=d.get("ts_candidates", 2000),
        incumbent_rule=d.get("incumbent_rule"),
    )


_MAPPING_KEYS = {
    "function": "function_id",
    "function_id": "function_id",
    "algos": "algorithm_ids",
    "algorithm_ids": "algorithm_ids",
    "trials": "trials",
    "budget_extra": "budget_extra",
    "n0": "n0",
    "noise_sd": "noise_sd",
    "seed": "base_seed",
    "base_seed": "base_seed",
    "out": "output_dir",
    "output_dir": "output_dir",
    "workers": "workers",
    "surrogate": "surrogate",
    "options": "options",
}


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    """Build a config from a flat mapping (JSON file or parsed CLI flags).

    Unknown keys are rejected so typos fail loudly.
    """
    kwargs: dict = {}
    for key, value in mapping.items():
        if key not in _MAPPING_KEYS:
            raise ValueError(f"unknown config key {key!r}")
        name = _MAPPING_KEYS[key]
        if name == "algorithm_ids":
            if isinstance(value, str):
                value = tuple(v for v in value.split(",") if v)
            else:
                value = tuple(value)
        elif name == "surrogate" and isinstance(value, dict):
            value = _surrogate_from_dict(value)
        elif name == "options" and isinstance(value, dict):
            value = _options_from_dict(value)
        kwargs[name] = value
    if "function_id" not in kwargs:
        raise ValueError("config must name a function")
    return ExperimentConfig(**kwargs)
