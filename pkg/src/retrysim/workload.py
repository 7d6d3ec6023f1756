"""Block-I/O workloads: trace file ingestion and synthetic generation.

Traces are CSV with header ``arrival_us,op,lba_4k,n_4k`` (op R or W, all
numbers non-negative integers, arrivals non-decreasing). The generator
produces open-loop request streams with exponential inter-arrivals,
uniform or Zipf-distributed addresses over a working set, and a discrete
request-size mix. Three read-heavy presets ship as named specs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Request",
    "TraceFormatError",
    "SynthSpec",
    "PRESETS",
    "parse_trace",
    "write_trace",
    "generate",
]

TRACE_HEADER = ("arrival_us", "op", "lba_4k", "n_4k")


@dataclass(frozen=True)
class Request:
    """One host request in 4-KiB logical blocks."""

    arrival_us: int
    op: str  # "R" | "W"
    lba: int
    n_blocks: int

    def __post_init__(self) -> None:
        if self.op not in ("R", "W"):
            raise ValueError(f"op must be R or W, got {self.op!r}")
        if self.arrival_us < 0 or self.lba < 0:
            raise ValueError("arrival and lba must be non-negative")
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be >= 1")


class TraceFormatError(ValueError):
    """Malformed trace file; message carries the 1-based line number."""


def parse_trace(path) -> list[Request]:
    """Read a trace file with strict validation.

    Raises TraceFormatError naming the offending line for a bad header,
    wrong field count, non-integer fields, unknown op, or a decreasing
    timestamp.
    """
    requests: list[Request] = []
    last_arrival = -1
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACE_HEADER:
            raise TraceFormatError(
                f"{path}: line 1: expected header {','.join(TRACE_HEADER)!r}, got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise TraceFormatError(f"{path}: line {lineno}: expected 4 fields, got {len(row)}")
            arrival_s, op, lba_s, n_s = (f.strip() for f in row)
            if op not in ("R", "W"):
                raise TraceFormatError(f"{path}: line {lineno}: unknown op {op!r}")
            try:
                arrival, lba, n = int(arrival_s), int(lba_s), int(n_s)
            except ValueError:
                raise TraceFormatError(
                    f"{path}: line {lineno}: non-integer numeric field in {row}"
                ) from None
            if arrival < 0 or lba < 0 or n < 1:
                raise TraceFormatError(f"{path}: line {lineno}: out-of-range value in {row}")
            if arrival < last_arrival:
                raise TraceFormatError(
                    f"{path}: line {lineno}: arrival {arrival} decreases (previous {last_arrival})"
                )
            last_arrival = arrival
            requests.append(Request(arrival, op, lba, n))
    return requests


def write_trace(requests, path) -> None:
    """Emit requests in the trace CSV format (parse_trace round-trips it)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for r in requests:
            w.writerow([r.arrival_us, r.op, r.lba, r.n_blocks])


@dataclass(frozen=True)
class SynthSpec:
    """Synthetic workload description.

    ``address_distribution`` is "uniform" or "zipf" (rank-frequency
    exponent ``zipf_theta``; hot blocks are the low addresses, which the
    striping layout spreads across channels). ``size_mix`` maps request
    size in blocks to its probability.
    """

    duration_us: int
    mean_iat_us: float
    read_ratio: float
    working_set_blocks: int
    address_distribution: str = "zipf"
    zipf_theta: float = 0.99
    size_mix: tuple[tuple[int, float], ...] = ((1, 0.6), (4, 0.3), (8, 0.1))

    def __post_init__(self) -> None:
        if self.duration_us <= 0 or self.mean_iat_us <= 0:
            raise ValueError("duration and mean inter-arrival must be positive")
        if not 0.0 <= self.read_ratio <= 1.0:
            raise ValueError("read_ratio must lie in [0, 1]")
        if self.working_set_blocks < 1:
            raise ValueError("working set must hold at least one block")
        if self.address_distribution not in ("uniform", "zipf"):
            raise ValueError(f"unknown address distribution {self.address_distribution!r}")
        if self.address_distribution == "zipf" and self.zipf_theta <= 0:
            raise ValueError("zipf_theta must be positive")
        if not self.size_mix:
            raise ValueError("size_mix must be non-empty")
        total = sum(p for _, p in self.size_mix)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"size_mix probabilities must sum to 1, got {total}")
        if any(s < 1 for s, _ in self.size_mix):
            raise ValueError("request sizes must be >= 1 block")


PRESETS: dict[str, SynthSpec] = {
    "read90": SynthSpec(
        duration_us=1_000_000, mean_iat_us=200.0, read_ratio=0.9, working_set_blocks=262_144
    ),
    "read70": SynthSpec(
        duration_us=1_000_000, mean_iat_us=200.0, read_ratio=0.7, working_set_blocks=262_144
    ),
    "mixed50": SynthSpec(
        duration_us=1_000_000, mean_iat_us=250.0, read_ratio=0.5, working_set_blocks=262_144
    ),
}


def _zipf_sampler(n: int, theta: float):
    # Rank-frequency sampling by inverse CDF over precomputed cumulative
    # weights; rank r (0-based) gets weight (r+1)^-theta.
    weights = np.arange(1, n + 1, dtype=np.float64) ** (-theta)
    cum = np.cumsum(weights)
    cum /= cum[-1]

    def sample(rng: np.random.Generator, size: int) -> np.ndarray:
        return np.searchsorted(cum, rng.random(size), side="left")

    return sample


def generate(spec: SynthSpec, seed: int) -> list[Request]:
    """Generate the request stream for a spec, deterministically per seed.

    Arrival times are integer microseconds (cumulative exponential gaps,
    rounded), so generated streams survive the trace format unchanged.
    """
    rng = np.random.default_rng(seed)
    n_est = int(spec.duration_us / spec.mean_iat_us * 1.2) + 16
    arrivals: list[int] = []
    t = 0.0
    while True:
        gaps = rng.exponential(spec.mean_iat_us, size=n_est)
        for g in gaps:
            t += g
            if t >= spec.duration_us:
                break
            arrivals.append(int(round(t)))
        if t >= spec.duration_us:
            break
    n = len(arrivals)
    if n == 0:
        return []

    is_read = rng.random(n) < spec.read_ratio
    if spec.address_distribution == "zipf":
        lbas = _zipf_sampler(spec.working_set_blocks, spec.zipf_theta)(rng, n)
    else:
        lbas = rng.integers(0, spec.working_set_blocks, size=n)
    sizes_v = np.array([s for s, _ in spec.size_mix])
    probs_v = np.array([p for _, p in spec.size_mix])
    sizes = rng.choice(sizes_v, size=n, p=probs_v)

    return [
        Request(arrivals[i], "R" if is_read[i] else "W", int(lbas[i]), int(sizes[i]))
        for i in range(n)
    ]
