"""Discrete-event SSD simulation of the read path under retry policies.

Requests split into page operations that are striped across channels,
chips, and dies. Each die services one operation at a time from a FIFO
queue; sensing occupies only the die, while every data transfer window
additionally needs the owning channel (FCFS arbitration by the time the
transfer became ready). Page reads resolve their retry walk up front --
the walk outcome is time-independent -- and then play the resulting
sense/transfer/decode schedule against die and channel availability, so
an uncontended read reproduces the closed-form latencies exactly. Writes
occupy the channel for one transfer and the die for the program time;
they exist to create realistic contention, not to model flash management.
"""

from __future__ import annotations

import csv
import hashlib
import heapq
from collections import deque
from dataclasses import dataclass

import numpy as np

from .ecc import EccConfig
from .nand import ModelParams, OperatingCondition, derive_distributions
from .retry import BestTrTable, HistoryStore, PolicySpec, RetryTable, resolve_read
from .timing import TimingParams
from .workload import Request

__all__ = [
    "Geometry",
    "PhysAddr",
    "SimConfig",
    "RequestRecord",
    "SimResult",
    "map_lba",
    "simulate",
    "write_request_csv",
]

#: Block-group width of one read-history slot (see retry.HistoryStore).
HISTORY_BLOCK_GROUP = 256


@dataclass(frozen=True)
class Geometry:
    """Physical organization: channels x chips x dies, pages per block.

    One 4-KiB logical block maps to one physical page (sub-page reads round
    up to a page), so ``capacity_pages`` doubles as the logical capacity.
    """

    channels: int = 8
    chips_per_channel: int = 4
    dies_per_chip: int = 2
    page_size_kib: int = 16
    pages_per_block: int = 256
    blocks_per_die: int = 512

    def __post_init__(self) -> None:
        for name in (
            "channels",
            "chips_per_channel",
            "dies_per_chip",
            "page_size_kib",
            "pages_per_block",
            "blocks_per_die",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def n_dies(self) -> int:
        return self.channels * self.chips_per_channel * self.dies_per_chip

    @property
    def capacity_pages(self) -> int:
        return self.n_dies * self.blocks_per_die * self.pages_per_block


@dataclass(frozen=True)
class PhysAddr:
    channel: int
    chip: int
    die: int
    block: int
    page: int
    page_type: str


_PAGE_TYPE_BY_INDEX = ("lsb", "csb", "msb")


def map_lba(lba: int, geometry: Geometry) -> PhysAddr:
    """Static striping: round-robin channels, then chips, then dies.

    Page type cycles LSB -> CSB -> MSB with the page index inside a block.
    The mapping is a bijection between logical blocks and physical pages.
    """
    if lba < 0 or lba >= geometry.capacity_pages:
        raise ValueError(f"lba {lba} outside capacity {geometry.capacity_pages}")
    channel = lba % geometry.channels
    rest = lba // geometry.channels
    chip = rest % geometry.chips_per_channel
    rest //= geometry.chips_per_channel
    die = rest % geometry.dies_per_chip
    idx = rest // geometry.dies_per_chip
    block = idx // geometry.pages_per_block
    page = idx % geometry.pages_per_block
    return PhysAddr(channel, chip, die, block, page, _PAGE_TYPE_BY_INDEX[page % 3])


@dataclass(frozen=True)
class SimConfig:
    """Everything one simulation depends on besides the request stream."""

    params: ModelParams
    condition: OperatingCondition
    policy: PolicySpec
    ecc: EccConfig
    timing: TimingParams
    geometry: Geometry
    retry_table: RetryTable
    best_tr: BestTrTable | None = None
    seed: int = 0


@dataclass(frozen=True)
class RequestRecord:
    """Outcome of one accepted request."""

    arrival_us: int
    op: str
    completion_us: float
    n_pages: int
    retry_steps: int
    uncorrectable_pages: int

    @property
    def response_us(self) -> float:
        return self.completion_us - self.arrival_us


@dataclass(frozen=True)
class SimResult:
    """Per-request outcomes plus run counters and the config echo.

    ``trace_digest`` fingerprints the submitted request stream (including
    addresses), so downstream comparisons can tell identical workloads
    apart from merely similar ones.
    """

    records: tuple[RequestRecord, ...]
    page_reads: int
    page_writes: int
    uncorrectable_pages: int
    rejected_requests: int
    config: SimConfig
    seed: int
    trace_digest: str

    def __post_init__(self) -> None:
        for r in self.records:
            if r.completion_us < r.arrival_us:
                raise ValueError("request completed before it arrived")


def write_request_csv(result: SimResult, path) -> None:
    """One row per accepted request, in arrival order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["arrival_us", "completion_us", "response_us", "pages", "retry_steps"])
        for r in result.records:
            w.writerow(
                [r.arrival_us, f"{r.completion_us:.4f}", f"{r.response_us:.4f}", r.n_pages, r.retry_steps]
            )


class _PageOp:
    __slots__ = (
        "kind",
        "req_idx",
        "die",
        "channel",
        "page_type",
        "group",
        "n_steps",
        "sense_dur",
        "tail",
        "k",
        "start",
    )

    def __init__(self, kind, req_idx, die, channel, page_type, group):
        self.kind = kind
        self.req_idx = req_idx
        self.die = die
        self.channel = channel
        self.page_type = page_type
        self.group = group


# Event kinds (heap entries are (time, seq, kind, payload); seq makes the
# ordering total and deterministic, so kind/payload are never compared).
_ARRIVAL, _CHANNEL_FREE, _TRANSFER_READY, _OP_DONE, _DIE_START = range(5)


def simulate(requests, config: SimConfig) -> SimResult:
    """Run the request stream to completion; deterministic given the seed.

    Out-of-capacity requests are rejected whole and counted; every accepted
    request produces exactly one record, in stream order. A request
    completes when its last page operation's decode (or program) finishes.
    """
    geo = config.geometry
    timing = config.timing
    policy = config.policy
    table = config.retry_table
    ecc = config.ecc
    params = config.params
    cond = config.condition
    best_tr = config.best_tr
    if policy.adaptive_tr and best_tr is None:
        raise ValueError(
            "adaptive sensing policy needs a characterization table (best_tr)"
        )
    derive_distributions(params, cond)  # fail fast on bad params

    rng = np.random.default_rng(config.seed)
    history = HistoryStore(len(table)) if policy.start_rule == "history" else None

    n_dies = geo.n_dies
    chips, dies = geo.chips_per_channel, geo.dies_per_chip
    capacity = geo.capacity_pages
    cache_move = timing.cache_move_us
    t_x, t_e, t_prog = timing.t_x_us, timing.t_e_us, timing.t_prog_us

    die_q: list[deque] = [deque() for _ in range(n_dies)]
    die_busy = [False] * n_dies
    die_free_at = [0.0] * n_dies
    die_start_scheduled = [False] * n_dies
    ch_busy = [False] * geo.channels
    ch_waiting: list[list] = [[] for _ in range(geo.channels)]

    # per accepted request, indexed by record id
    r_arrival: list[int] = []
    r_op: list[str] = []
    r_pages: list[int] = []
    r_pending: list[int] = []
    r_completion: list[float] = []
    r_steps: list[int] = []
    r_uncorr: list[int] = []

    page_reads = page_writes = uncorrectable = rejected = 0

    heap: list = []
    seq = 0

    def push(time_, kind, payload):
        nonlocal seq
        heapq.heappush(heap, (time_, seq, kind, payload))
        seq += 1

    def grant(ch: int, now: float) -> None:
        if ch_busy[ch] or not ch_waiting[ch]:
            return
        _, _, op = heapq.heappop(ch_waiting[ch])
        ch_busy[ch] = True
        x_end = now + t_x
        push(x_end, _CHANNEL_FREE, ch)
        if op.kind == "W":
            push(x_end + t_prog, _OP_DONE, op)
            return
        op.k += 1
        ecc_end = x_end + t_e
        if op.k < op.n_steps:
            if policy.pipelined:
                stride = op.sense_dur + cache_move
                ready = max(op.start + op.k * stride + op.sense_dur, x_end)
            else:
                ready = ecc_end + op.sense_dur
            push(ready, _TRANSFER_READY, op)
        else:
            push(ecc_end, _OP_DONE, op)

    digest = hashlib.sha256()
    for req in requests:
        digest.update(f"{req.arrival_us},{req.op},{req.lba},{req.n_blocks}\n".encode())
        push(req.arrival_us, _ARRIVAL, req)

    while heap:
        time_, _, kind, payload = heapq.heappop(heap)

        if kind == _ARRIVAL:
            req: Request = payload
            if req.lba + req.n_blocks > capacity:
                rejected += 1
                continue
            ri = len(r_arrival)
            r_arrival.append(req.arrival_us)
            r_op.append(req.op)
            r_pages.append(req.n_blocks)
            r_pending.append(req.n_blocks)
            r_completion.append(float(req.arrival_us))
            r_steps.append(0)
            r_uncorr.append(0)
            if req.op == "R":
                page_reads += req.n_blocks
            else:
                page_writes += req.n_blocks
            for lba in range(req.lba, req.lba + req.n_blocks):
                addr = map_lba(lba, geo)
                die = (addr.channel * chips + addr.chip) * dies + addr.die
                op = _PageOp(
                    req.op,
                    ri,
                    die,
                    addr.channel,
                    addr.page_type,
                    (addr.channel, addr.chip, addr.die, addr.block // HISTORY_BLOCK_GROUP, addr.page_type),
                )
                die_q[die].append(op)
                if not die_busy[die] and not die_start_scheduled[die]:
                    die_start_scheduled[die] = True
                    push(max(time_, die_free_at[die]), _DIE_START, die)

        elif kind == _CHANNEL_FREE:
            ch_busy[payload] = False
            grant(payload, time_)

        elif kind == _TRANSFER_READY:
            op = payload
            heapq.heappush(ch_waiting[op.channel], (time_, seq, op))
            seq += 1
            grant(op.channel, time_)

        elif kind == _OP_DONE:
            op = payload
            die_busy[op.die] = False
            die_free_at[op.die] = time_ + op.tail
            if die_q[op.die] and not die_start_scheduled[op.die]:
                die_start_scheduled[op.die] = True
                push(die_free_at[op.die], _DIE_START, op.die)
            ri = op.req_idx
            r_pending[ri] -= 1
            if time_ > r_completion[ri]:
                r_completion[ri] = time_
            continue

        elif kind == _DIE_START:
            die = payload
            die_start_scheduled[die] = False
            if die_busy[die] or not die_q[die]:
                continue
            op = die_q[die].popleft()
            die_busy[die] = True
            op.start = time_
            op.tail = 0.0
            if op.kind == "W":
                push(time_, _TRANSFER_READY, op)
                continue
            trace = resolve_read(
                params,
                cond,
                table,
                policy,
                op.page_type,
                ecc,
                history,
                rng,
                timing=timing,
                best_tr=best_tr,
                page_group=op.group,
            )
            op.n_steps = trace.n_steps
            op.sense_dur = trace.tr_scale_used * timing.t_r_us
            op.k = 0
            r_steps[op.req_idx] += trace.n_steps
            if not trace.success:
                uncorrectable += 1
                r_uncorr[op.req_idx] += 1
            elif (
                policy.pipelined
                and trace.start_index + trace.n_steps < len(table)
                and not timing.free_speculative_abort
            ):
                # A speculative sense of the next entry was in flight when
                # the final decode resolved; the die pays its reset.
                op.tail = timing.t_rst_us
            push(time_ + op.sense_dur, _TRANSFER_READY, op)

    if any(p != 0 for p in r_pending):
        raise RuntimeError("simulation drained with incomplete requests")

    records = tuple(
        RequestRecord(r_arrival[i], r_op[i], r_completion[i], r_pages[i], r_steps[i], r_uncorr[i])
        for i in range(len(r_arrival))
    )
    return SimResult(
        records=records,
        page_reads=page_reads,
        page_writes=page_writes,
        uncorrectable_pages=uncorrectable,
        rejected_requests=rejected,
        config=config,
        seed=config.seed,
        trace_digest=digest.hexdigest()[:16],
    )
