"""Summary statistics over simulation results and policy comparisons.

A summary carries two hashes: ``config_hash`` fingerprints everything the
run depended on, while ``context_hash`` excludes the policy. Two runs are
comparable exactly when their context hashes match -- same trace, same
operating condition, same hardware -- so a comparison that would silently
mix contexts fails loudly instead.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

from .sim import SimResult

__all__ = ["Comparison", "Summary", "aggregate", "compare", "percentile"]


def percentile(sorted_values, q: float) -> float:
    """Nearest-rank percentile: the ceil(q*n)-th smallest value.

    ``sorted_values`` must be ascending. The nearest-rank definition always
    returns an observed value, so tail percentiles are never interpolated
    below the worst observations.
    """
    if not 0.0 < q <= 1.0:
        raise ValueError("q must be in (0, 1]")
    n = len(sorted_values)
    if n == 0:
        raise ValueError("no values")
    return float(sorted_values[max(0, math.ceil(q * n) - 1)])


def _canonical(obj):
    """Recursively convert a config object into JSON-stable primitives."""
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, frozenset):
        return sorted(str(v) for v in obj)
    if isinstance(obj, float):
        return format(obj, ".12g")
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    if hasattr(obj, "__dataclass_fields__"):
        return _canonical(asdict(obj))
    if hasattr(obj, "_entries"):  # characterization table
        return _canonical({"entries": obj._entries, "flagged": obj.flagged})
    raise TypeError(f"cannot canonicalize {type(obj).__name__}")


def _digest(payload: dict) -> str:
    blob = json.dumps(_canonical(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class Summary:
    """Aggregate view of one run, sufficient for cross-run comparison."""

    policy: str
    n_requests: int
    n_reads: int
    mean_response_us: float
    median_response_us: float
    p99_response_us: float
    mean_retry_steps: float
    throughput_rps: float
    uncorrectable_requests: int
    uncorrectable_pages: int
    rejected_requests: int
    seed: int
    config_hash: str
    context_hash: str

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "Summary":
        with open(path) as fh:
            return cls(**json.load(fh))


def aggregate(result: SimResult) -> Summary:
    """Summarize a run; latency statistics exclude uncorrectable requests.

    Retry steps are averaged per page read over clean read requests.
    Throughput counts every completed request over the span from first
    arrival to last completion.
    """
    if not result.records:
        raise ValueError("no completed requests to aggregate")
    cfg = result.config
    context = {
        "params": cfg.params,
        "condition": cfg.condition,
        "ecc": cfg.ecc,
        "timing": cfg.timing,
        "geometry": cfg.geometry,
        "retry_table": cfg.retry_table,
        "seed": cfg.seed,
        "trace": result.trace_digest,
    }
    # The characterization table feeds the policy mechanism, not the
    # environment, so it hashes with the policy side.
    config_hash = _digest({**context, "policy": cfg.policy, "best_tr": cfg.best_tr})
    context_hash = _digest(context)

    clean = [r for r in result.records if r.uncorrectable_pages == 0]
    uncorrectable_requests = len(result.records) - len(clean)
    if not clean:
        raise ValueError("every request hit an uncorrectable page")
    responses = sorted(r.response_us for r in clean)
    reads = [r for r in clean if r.op == "R"]
    read_pages = sum(r.n_pages for r in reads)
    steps = sum(r.retry_steps for r in reads)

    first_arrival = min(r.arrival_us for r in result.records)
    last_completion = max(r.completion_us for r in result.records)
    span_us = last_completion - first_arrival
    throughput = len(result.records) / span_us * 1e6 if span_us > 0 else float("inf")

    return Summary(
        policy=cfg.policy.label,
        n_requests=len(result.records),
        n_reads=len(reads),
        mean_response_us=sum(responses) / len(responses),
        median_response_us=percentile(responses, 0.5),
        p99_response_us=percentile(responses, 0.99),
        mean_retry_steps=steps / read_pages if read_pages else 0.0,
        throughput_rps=throughput,
        uncorrectable_requests=uncorrectable_requests,
        uncorrectable_pages=result.uncorrectable_pages,
        rejected_requests=result.rejected_requests,
        seed=result.seed,
        config_hash=config_hash,
        context_hash=context_hash,
    )


@dataclass(frozen=True)
class Comparison:
    """Relative improvement of a candidate policy over a baseline run."""

    baseline_policy: str
    candidate_policy: str
    mean_reduction_pct: float
    median_reduction_pct: float
    p99_reduction_pct: float

    def as_dict(self) -> dict:
        return asdict(self)


def compare(baseline: Summary, candidate: Summary) -> Comparison:
    """Percent response-time reductions; requires matching contexts."""
    if baseline.context_hash != candidate.context_hash:
        raise ValueError(
            "summaries come from different contexts "
            f"({baseline.context_hash} vs {candidate.context_hash}); "
            "compare runs that differ only in policy"
        )

    def red(b: float, c: float) -> float:
        return 100.0 * (b - c) / b

    return Comparison(
        baseline_policy=baseline.policy,
        candidate_policy=candidate.policy,
        mean_reduction_pct=red(baseline.mean_response_us, candidate.mean_response_us),
        median_reduction_pct=red(baseline.median_response_us, candidate.median_response_us),
        p99_reduction_pct=red(baseline.p99_response_us, candidate.p99_response_us),
    )
