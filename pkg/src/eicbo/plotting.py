"""Figure output for benchmark summaries."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

# Stable ids inside the SVG so reruns diff cleanly.
matplotlib.rcParams["svg.hashsalt"] = "eicbo"


def save_regret_figure(path, stats_by_algo, function_id: str) -> None:
    """Mean cumulative regret per algorithm with a 95% confidence band.

    ``stats_by_algo`` maps an algorithm id to (mean, ci_low, ci_high) arrays
    indexed by iteration.
    """
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for algo, stats in stats_by_algo.items():
        mean, lo, hi = stats
        iters = range(len(mean))
        line, = ax.plot(iters, mean, label=algo, linewidth=1.5)
        ax.fill_between(iters, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("cumulative regret")
    ax.set_title(function_id)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
