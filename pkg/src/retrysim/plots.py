"""Figure rendering for simulation reports.

Every function takes already-computed data, writes one PNG, and returns
the path; nothing here re-runs simulations. The Agg backend is forced so
rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .stats import Summary

__all__ = ["response_cdf", "policy_bars", "sweep_lines"]

_DPI = 150


def response_cdf(responses_by_policy: dict, path) -> str:
    """Empirical CDF of request response times, one curve per policy.

    ``responses_by_policy`` maps a policy label to an iterable of response
    times in microseconds.
    """
    if not responses_by_policy:
        raise ValueError("nothing to plot")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, values in responses_by_policy.items():
        xs = np.sort(np.asarray(list(values), dtype=float))
        if xs.size == 0:
            raise ValueError(f"policy {label!r} has no responses")
        ys = np.arange(1, xs.size + 1) / xs.size
        ax.step(xs, ys, where="post", label=label)
    ax.set_xlabel("response time (µs)")
    ax.set_ylabel("fraction of requests")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)


def policy_bars(summaries: list[Summary], path) -> str:
    """Mean and p99 response per policy, side by side."""
    if not summaries:
        raise ValueError("nothing to plot")
    labels = [s.policy for s in summaries]
    means = [s.mean_response_us for s in summaries]
    p99s = [s.p99_response_us for s in summaries]
    x = np.arange(len(labels))
    width = 0.38
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.bar(x - width / 2, means, width, label="mean")
    ax.bar(x + width / 2, p99s, width, label="p99")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel("response time (µs)")
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)


def sweep_lines(rows: list[dict], path, metric: str = "mean_response_us") -> str:
    """Metric vs operating condition, one line per policy.

    ``rows`` are sweep records with keys ``policy``, ``condition`` (a
    printable label), and the metric. Conditions keep their first-seen
    order, which the sweep emits from mildest to harshest.
    """
    if not rows:
        raise ValueError("nothing to plot")
    conditions: list[str] = []
    for row in rows:
        if row["condition"] not in conditions:
            conditions.append(row["condition"])
    by_policy: dict[str, dict[str, float]] = {}
    for row in rows:
        by_policy.setdefault(row["policy"], {})[row["condition"]] = row[metric]
    x = np.arange(len(conditions))
    fig, ax = plt.subplots(figsize=(7.5, 4.5))
    for policy, values in by_policy.items():
        ys = [values.get(c, np.nan) for c in conditions]
        ax.plot(x, ys, marker="o", label=policy)
    ax.set_xticks(x)
    ax.set_xticklabels(conditions, rotation=30, ha="right")
    ax.set_ylabel(metric.replace("_", " "))
    ax.set_xlabel("operating condition")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)
