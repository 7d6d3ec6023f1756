"""Flash operation timing: per-step and end-to-end read latencies.

A read step is sense (on the die), transfer (on the channel), then ECC
decode (in the controller). Sequentially retried steps run the full
sense+transfer+decode chain back to back. The pipelined discipline keeps
the die sensing continuously and overlaps each transfer/decode with the
next sense, so only the final step pays transfer+decode beyond the sense
chain; it also implies a speculative extra sense that must be reset once
the outcome is known.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "TimingParams",
    "StepIntervals",
    "Timeline",
    "latency_sequential",
    "latency_pipelined",
    "build_timeline",
]


@dataclass(frozen=True)
class TimingParams:
    """Microsecond timings of the read path (program and reset included)."""

    t_r_us: float = 61.0
    t_x_us: float = 18.3
    t_e_us: float = 6.0
    t_prog_us: float = 660.0
    t_rst_us: float = 5.0
    #: Latency of moving a finished sense into the cache register before the
    #: next sense may begin (0 = free, the common modelling choice).
    cache_move_us: float = 0.0
    #: If true, an in-flight speculative sense is abandoned at no cost
    #: instead of paying t_rst on the die.
    free_speculative_abort: bool = False

    def __post_init__(self) -> None:
        for name in ("t_r_us", "t_x_us", "t_e_us", "t_prog_us", "t_rst_us", "cache_move_us"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.t_r_us <= 0:
            raise ValueError("t_r_us must be positive")


@dataclass(frozen=True)
class StepIntervals:
    sense: tuple[float, float]
    transfer: tuple[float, float]
    ecc: tuple[float, float]


@dataclass(frozen=True)
class Timeline:
    """Interval schedule of one page read starting at time 0."""

    steps: tuple[StepIntervals, ...]
    total_latency_us: float
    die_busy_until_us: float
    channel_busy_intervals: tuple[tuple[float, float], ...]


def latency_sequential(n_steps: int, t: TimingParams, tr_scale: float = 1.0) -> float:
    """Latency of an n-step read with strictly serial steps."""
    _check_steps(n_steps, tr_scale)
    return n_steps * (tr_scale * t.t_r_us + t.t_x_us + t.t_e_us)


def latency_pipelined(n_steps: int, t: TimingParams, tr_scale: float = 1.0) -> float:
    """Latency of an n-step read with sensing pipelined against transfers.

    With transfers no longer than a (scaled) sense this collapses to
    n*tr' + t_x + t_e; the general recurrence below also covers transfers
    that outlast the sense window.
    """
    _check_steps(n_steps, tr_scale)
    return _pipelined_schedule(n_steps, t, tr_scale)[-1].ecc[1]


def _check_steps(n_steps: int, tr_scale: float) -> None:
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if not (0.0 < tr_scale <= 1.0):
        raise ValueError(f"tr_scale must be in (0, 1], got {tr_scale}")


def _sequential_schedule(n: int, t: TimingParams, tr: float) -> list[StepIntervals]:
    steps = []
    now = 0.0
    for _ in range(n):
        sense = (now, now + tr * t.t_r_us)
        transfer = (sense[1], sense[1] + t.t_x_us)
        ecc = (transfer[1], transfer[1] + t.t_e_us)
        steps.append(StepIntervals(sense, transfer, ecc))
        now = ecc[1]
    return steps

def _pipelined_schedule(n: int, t: TimingParams, tr: float) -> list[StepIntervals]:
    steps = []
    prev_transfer_end = 0.0
    stride = tr * t.t_r_us + t.cache_move_us
    for k in range(n):
        sense = (k * stride, k * stride + tr * t.t_r_us)
        start = max(sense[1], prev_transfer_end)
        transfer = (start, start + t.t_x_us)
        ecc = (transfer[1], transfer[1] + t.t_e_us)
        steps.append(StepIntervals(sense, transfer, ecc))
        prev_transfer_end = transfer[1]
    return steps


def build_timeline(
    n_steps: int,
    success: bool,
    t: TimingParams,
    *,
    pipelined: bool,
    tr_scale: float = 1.0,
    next_entry_exists: bool = True,
) -> Timeline:
    """Lay out the full interval schedule of one read in isolation.

    Besides the step intervals this fixes when the die is free again. A
    sequential read holds the die until its last transfer has drained. A
    pipelined read that succeeds while a further retry entry existed has a
    speculative sense in flight; the reset command for it is issued once the
    final decode resolves, so the die stays busy t_rst beyond the total
    latency (unless aborts are free).

    Args:
        n_steps: steps actually executed (>= 1).
        success: whether the final step decoded.
        t: timing parameters.
        pipelined: step discipline.
        tr_scale: sensing-interval scale used by every step.
        next_entry_exists: whether the retry table held an entry past the
            last executed step (i.e. a speculative sense was started).
    """
    _check_steps(n_steps, tr_scale)
    sched = (_pipelined_schedule if pipelined else _sequential_schedule)(n_steps, t, tr_scale)
    total = sched[-1].ecc[1]
    if pipelined:
        die_busy = total
        if success and next_entry_exists and not t.free_speculative_abort:
            die_busy = max(total, total + t.t_rst_us)
    else:
        die_busy = sched[-1].transfer[1]
    return Timeline(
        steps=tuple(sched),
        total_latency_us=total,
        die_busy_until_us=die_busy,
        channel_busy_intervals=tuple(s.transfer for s in sched),
    )
