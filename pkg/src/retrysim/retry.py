"""Read-retry: the vendor table walk and the policies that shorten it.

A failed page read is retried by stepping every read-reference voltage
down the vendor retry table until a step decodes or the table is
exhausted. Policies vary three independent choices:

* start rule -- begin at table entry 0, or at the last entry that worked
  for reads of the same page group (block neighbourhood x page type);
* pipelined stepping -- keep the die sensing back to back and overlap
  transfers/decodes with the next sense;
* adaptive sensing -- run every step with a shortened sensing interval
  taken from an offline characterization table keyed by operating
  condition.

The characterization guarantees that the shortened interval never changes
which step a read succeeds at: a scale is admitted only if the worst-case
(guardbanded, deterministic) decode still clears at the optimal voltages
*and* the deterministic table walk lands on the same step as full-time
sensing, for every page type at that condition.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .ecc import EccConfig, decode, realize_errors
from .nand import (
    N_BOUNDARIES,
    PAGE_TYPES,
    CellStateModel,
    ModelParams,
    OperatingCondition,
    VrefSet,
    default_vrefs,
    derive_distributions,
    optimal_vref,
    page_rber,
)
from .timing import TimingParams, latency_pipelined, latency_sequential

__all__ = [
    "RetryTable",
    "PolicySpec",
    "POLICY_NAMES",
    "HistoryStore",
    "RetryTrace",
    "BestTrTable",
    "build_retry_table",
    "history_start",
    "resolve_read",
    "deterministic_steps",
    "characterize_best_tr",
    "mean_retry_steps",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RetryTable:
    """Vendor retry table: per-entry voltage offsets for all 7 boundaries.

    Entry 0 is the default read (zero offset); entry k shifts every
    boundary by k times the step, downward for the usual retention-induced
    drift.
    """

    entries: tuple[tuple[float, ...], ...]
    step_mv: float
    max_steps: int

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError("table needs at least one entry")
        if len(self.entries) != self.max_steps:
            raise ValueError("entry count must equal max_steps")
        if self.step_mv <= 0:
            raise ValueError("step_mv must be positive")
        for e in self.entries:
            if len(e) != N_BOUNDARIES:
                raise ValueError("each entry needs one offset per boundary")

    def __len__(self) -> int:
        return self.max_steps


def build_retry_table(
    step_mv: float = 10.0, max_steps: int = 50, sign: float = -1.0, graded: bool = True
) -> RetryTable:
    """Monotone downward table stepping each boundary at its drift rate.

    Higher boundaries separate states that leak faster, so their optimal
    read voltages drift proportionally faster -- the midpoint between
    states b-1 and b moves at a rate proportional to (2b-1). Vendor tables
    mirror this by stepping different read levels by different amounts per
    entry; here entry k shifts boundary b by sign*k*step_mv*(2b-1)/7, so
    the middle boundary (4) moves exactly step_mv per entry and a single
    entry index re-centres all seven boundaries at once. ``graded=False``
    gives the naive variant that shifts every boundary identically (useful
    for experiments; it cannot track the graded drift at high ages, where
    the spread across a page's boundaries exceeds the ECC budget).
    """
    if sign not in (-1.0, 1.0, -1, 1):
        raise ValueError("sign must be +1 or -1")
    if graded:
        weights = tuple((2 * b - 1) / 7.0 for b in range(1, N_BOUNDARIES + 1))
    else:
        weights = (1.0,) * N_BOUNDARIES
    entries = tuple(
        tuple(float(sign) * k * step_mv * w for w in weights) for k in range(max_steps)
    )
    return RetryTable(entries=entries, step_mv=step_mv, max_steps=max_steps)


@dataclass(frozen=True)
class PolicySpec:
    """One retry policy: start rule plus the two step-level switches."""

    start_rule: str = "default"  # "default" | "history"
    pipelined: bool = False
    adaptive_tr: bool = False

    def __post_init__(self) -> None:
        if self.start_rule not in ("default", "history"):
            raise ValueError(f"start_rule must be 'default' or 'history', got {self.start_rule!r}")

    @property
    def label(self) -> str:
        for name, spec in POLICY_NAMES.items():
            if spec == self:
                return name
        parts = [self.start_rule]
        if self.pipelined:
            parts.append("pipelined")
        if self.adaptive_tr:
            parts.append("adaptive")
        return "+".join(parts)

    @classmethod
    def from_name(cls, name: str) -> "PolicySpec":
        try:
            return POLICY_NAMES[name]
        except KeyError:
            raise ValueError(
                f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}"
            ) from None


#: Named policy points used by the command line and the sweep.
POLICY_NAMES: dict[str, PolicySpec] = {
    "baseline": PolicySpec(),
    "history": PolicySpec(start_rule="history"),
    "pr2": PolicySpec(pipelined=True),
    "ar2": PolicySpec(adaptive_tr=True),
    "pr2ar2": PolicySpec(pipelined=True, adaptive_tr=True),
    "history-pr2ar2": PolicySpec(start_rule="history", pipelined=True, adaptive_tr=True),
}


class HistoryStore:
    """Last successful table index per page group.

    Stored indices are valid for the table the store was built against;
    lookups never send a read past the end of the table.
    """

    def __init__(self, table_len: int):
        if table_len < 1:
            raise ValueError("table_len must be >= 1")
        self._table_len = table_len
        self._last: dict = {}

    def get(self, page_group) -> int:
        return self._last.get(page_group, 0)

    def update(self, page_group, index: int) -> None:
        if not 0 <= index < self._table_len:
            raise ValueError(f"index {index} out of range for table of {self._table_len}")
        self._last[page_group] = index

    def __len__(self) -> int:
        return len(self._last)


def history_start(history: HistoryStore | None, page_group) -> int:
    """Starting table index for a read: last success of the group, else 0."""
    if history is None:
        return 0
    return history.get(page_group)


@dataclass
class RetryTrace:
    """What one resolved read did: every step tried, and the outcome.

    ``steps`` holds (table_index, rber, margin) per attempted step. On
    success the last margin is >= 0 and all earlier ones are negative; on
    exhaustion every margin is negative and ``latency_us`` is the sentinel
    cost of the full traversal from the start index.
    """

    steps: list[tuple[int, float, int]]
    success: bool
    n_steps: int
    latency_us: float
    tr_scale_used: float
    start_index: int

    def __post_init__(self) -> None:
        if self.n_steps != len(self.steps) or self.n_steps < 1:
            raise ValueError("n_steps must match the attempted step list")
        if self.success:
            if self.steps[-1][2] < 0:
                raise ValueError("successful trace must end with margin >= 0")
            if any(m >= 0 for _, _, m in self.steps[:-1]):
                raise ValueError("only the final step of a trace may succeed")
        elif any(m >= 0 for _, _, m in self.steps):
            raise ValueError("failed trace cannot contain a succeeding step")


class BestTrTable:
    """Characterization result: best sensing scale per operating condition.

    Immutable after construction. ``flagged`` marks conditions that were
    beyond ECC even at full sensing time (scale pinned to 1.0).
    """

    CSV_HEADER = ("retention_days", "pe_cycles", "tr_scale")

    def __init__(self, entries: dict[tuple[float, int], float], flagged: frozenset = frozenset()):
        for key, scale in entries.items():
            if not (0.0 < scale <= 1.0):
                raise ValueError(f"tr_scale {scale} out of (0, 1] at {key}")
        self._entries = dict(entries)
        self.flagged = frozenset(flagged)

    def __len__(self) -> int:
        return len(self._entries)

    def conditions(self) -> list[tuple[float, int]]:
        return sorted(self._entries)

    def lookup(self, cond: OperatingCondition) -> float:
        """Scale for a condition; nearest characterized point if not exact."""
        if not self._entries:
            raise ValueError("empty characterization table")
        key = cond.key
        if key in self._entries:
            return self._entries[key]
        # Nearest in a normalized (age, wear) metric; ties break toward the
        # more conservative (larger) scale.
        def dist(k):
            return math.hypot((k[0] - key[0]) / 365.0, (k[1] - key[1]) / 1000.0)

        best = min(self._entries, key=lambda k: (dist(k), -self._entries[k]))
        return self._entries[best]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.CSV_HEADER)
            for days, pec in self.conditions():
                w.writerow([f"{days:g}", pec, f"{self._entries[(days, pec)]:g}"])

    @classmethod
    def from_csv(cls, path) -> "BestTrTable":
        entries: dict[tuple[float, int], float] = {}
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r, None)
            if header is None or tuple(h.strip() for h in header) != cls.CSV_HEADER:
                raise ValueError(f"bad characterization header in {path}: {header}")
            for row in r:
                if not row:
                    continue
                days, pec, scale = float(row[0]), int(row[1]), float(row[2])
                entries[(days, pec)] = scale
        return cls(entries)


def resolve_read(
    params: ModelParams,
    cond: OperatingCondition,
    table: RetryTable,
    policy: PolicySpec,
    page_type: str,
    ecc: EccConfig,
    history: HistoryStore | None,
    rng: np.random.Generator | None,
    *,
    timing: TimingParams | None = None,
    best_tr: BestTrTable | None = None,
    page_group=0,
) -> RetryTrace:
    """Run one page read to completion under a policy.

    Walks the retry table from the policy's start index, realizing error
    counts and decoding at each step, until a step decodes or the table is
    exhausted. On success under the history rule the store is updated with
    the succeeding index. Latency is the policy's closed-form cost for the
    executed steps (exhaustion pays the full traversal from the start index
    as an uncorrectable-read sentinel).

    The caller owns the rng; passing the same seeded generator and
    arguments reproduces the trace exactly.
    """
    if page_type not in PAGE_TYPES:
        raise ValueError(f"unknown page type {page_type!r}")
    timing = timing if timing is not None else TimingParams()
    model = derive_distributions(params, cond)
    base = default_vrefs(params)

    tr_scale = 1.0
    if policy.adaptive_tr:
        if best_tr is None:
            raise ValueError("adaptive policy needs a characterization table")
        tr_scale = best_tr.lookup(cond)

    start = history_start(history, page_group) if policy.start_rule == "history" else 0
    start = min(start, len(table) - 1)

    steps: list[tuple[int, float, int]] = []
    success = False
    for k in range(start, len(table)):
        vrefs = base.offset(table.entries[k])
        rber = page_rber(model, page_type, vrefs, tr_scale)
        result = decode(realize_errors(rber, ecc, rng), ecc)
        steps.append((k, rber, result.margin))
        if result.success:
            success = True
            break

    n = len(steps)
    latency_fn = latency_pipelined if policy.pipelined else latency_sequential
    latency = latency_fn(n, timing, tr_scale)

    if success and policy.start_rule == "history" and history is not None:
        history.update(page_group, steps[-1][0])

    return RetryTrace(
        steps=steps,
        success=success,
        n_steps=n,
        latency_us=latency,
        tr_scale_used=tr_scale,
        start_index=start,
    )


def deterministic_steps(
    model: CellStateModel,
    base: VrefSet,
    table: RetryTable,
    page_type: str,
    ecc: EccConfig,
    tr_scale: float = 1.0,
) -> int | None:
    """Length of the worst-case table walk from entry 0, or None if it
    never decodes. Requires a deterministic ECC configuration."""
    if not ecc.deterministic_mode:
        raise ValueError("deterministic walk needs deterministic_mode ECC")
    for k in range(len(table)):
        rber = page_rber(model, page_type, base.offset(table.entries[k]), tr_scale)
        if decode(realize_errors(rber, ecc), ecc).success:
            return k + 1
    return None


def _worst_case_clears(model: CellStateModel, ecc: EccConfig, tr_scale: float) -> bool:
    # Guardbanded decode at the per-boundary optimal voltages for this scale.
    vrefs = optimal_vref(model, tr_scale)
    for pt in PAGE_TYPES:
        rber = page_rber(model, pt, vrefs, tr_scale)
        if not decode(realize_errors(rber, ecc), ecc).success:
            return False
    return True


def characterize_best_tr(
    params: ModelParams,
    conditions,
    table: RetryTable,
    ecc: EccConfig,
    tr_grid=None,
) -> BestTrTable:
    """Offline sweep: smallest safe sensing scale per operating condition.

    A scale is admissible at a condition when, for every page type, the
    guardbanded worst-case decode still clears both at the optimal read
    voltages and at the voltages of the retry-table entry where the
    full-time-sensing walk lands. The second check is what makes enabling
    the shortened sensing incapable of adding a retry step: shortening the
    sensing interval inflates every read's error rate, so entries that
    failed at full time still fail, and the landing entry -- the only one
    that must keep decoding -- is checked explicitly. The walk under an
    admissible scale is therefore identical to the full-time walk, entry
    for entry.

    The landing entries are always located with the 6-sigma safety floor,
    while both decode checks use the caller's guardband; a caller asking
    for extra conservatism tightens the admissible set without moving the
    reference landing, which keeps the allowed reduction monotone in the
    guardband. The grid is scanned downward from 1.0 and stops at the
    first inadmissible scale (sensing-interval inflation only grows as the
    scale shrinks, so admissibility is a prefix of the grid).

    Conditions beyond ECC even at scale 1.0 are recorded at 1.0 and
    flagged. Requires deterministic ECC with a guardband of at least 6
    sigmas.
    """
    if not ecc.deterministic_mode or ecc.guardband_sigmas < 6.0:
        raise ValueError("characterization needs deterministic ECC with guardband >= 6 sigmas")
    walk_ecc = replace(ecc, guardband_sigmas=6.0)
    if tr_grid is None:
        tr_grid = [round(1.0 - 0.05 * i, 2) for i in range(1, 20)]  # 0.95 .. 0.05
    else:
        tr_grid = sorted((float(s) for s in tr_grid), reverse=True)
        if any(not (0.0 < s < 1.0) for s in tr_grid):
            raise ValueError("tr grid scales must lie in (0, 1)")

    entries: dict[tuple[float, int], float] = {}
    flagged = set()
    base = default_vrefs(params)
    for cond in conditions:
        model = derive_distributions(params, cond)
        landings = {
            pt: deterministic_steps(model, base, table, pt, walk_ecc, 1.0) for pt in PAGE_TYPES
        }
        if any(n is None for n in landings.values()) or not _worst_case_clears(model, ecc, 1.0):
            log.warning(
                "condition %s is beyond ECC at full sensing time; pinning scale to 1.0", cond
            )
            entries[cond.key] = 1.0
            flagged.add(cond.key)
            continue
        landing_vrefs = {
            pt: base.offset(table.entries[n - 1]) for pt, n in landings.items()
        }
        best = 1.0
        for scale in tr_grid:
            if not _worst_case_clears(model, ecc, scale):
                break
            clears = all(
                decode(
                    realize_errors(page_rber(model, pt, landing_vrefs[pt], scale), ecc), ecc
                ).success
                for pt in PAGE_TYPES
            )
            if not clears:
                break
            best = scale
        entries[cond.key] = best
    return BestTrTable(entries, frozenset(flagged))


def mean_retry_steps(
    params: ModelParams,
    cond: OperatingCondition,
    table: RetryTable,
    ecc: EccConfig,
    n_reads: int = 10000,
    seed: int = 0,
    tr_scale: float = 1.0,
) -> float:
    """Mean steps to resolve a default-start read, over an even page mix.

    Vectorized over reads: per page type the per-entry RBER schedule is
    fixed, so each table step is one batched binomial draw across the reads
    still unresolved. Exhausted reads count the full table length.
    """
    if n_reads < 1:
        raise ValueError("n_reads must be >= 1")
    rng = np.random.default_rng(seed)
    model = derive_distributions(params, cond)
    base = default_vrefs(params)
    t = ecc.correction_capability_t

    total = 0.0
    counted = 0
    for i, pt in enumerate(PAGE_TYPES):
        reads = n_reads // 3 + (1 if i < n_reads % 3 else 0)
        if reads == 0:
            continue
        rbers = [
            page_rber(model, pt, base.offset(entry), tr_scale) for entry in table.entries
        ]
        if ecc.deterministic_mode:
            walk = deterministic_steps(model, base, table, pt, ecc, tr_scale)
            total += reads * (walk if walk is not None else len(table))
            counted += reads
            continue
        active = reads
        for k, rber in enumerate(rbers):
            draws = rng.binomial(
                ecc.codeword_payload_bits, rber, size=(active, ecc.codewords_per_page)
            )
            ok = (draws.max(axis=1) <= t).sum()
            total += int(ok) * (k + 1)
            active -= int(ok)
            if active == 0:
                break
        total += active * len(table)  # exhausted reads pay the whole walk
        counted += reads
    return total / counted
