"""Parametric threshold-voltage model of a TLC NAND cell array.

Eight Gaussian voltage states encode three bits per cell. Aging moves the
states: retention loss drags the programmed states downward (higher states
leak faster), program/erase wear widens every state, and shortened sensing
inflates the effective read noise. Raw bit errors come from the overlap of
adjacent states at the applied read-reference voltages, so every quantity
of interest here reduces to Gaussian tail probabilities.

Units: voltages in mV, ages in days, wear in program/erase cycles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

__all__ = [
    "PAGE_TYPES",
    "N_STATES",
    "N_BOUNDARIES",
    "OperatingCondition",
    "StateDistribution",
    "VrefSet",
    "CellStateModel",
    "ModelParams",
    "default_params",
    "derive_distributions",
    "default_vrefs",
    "boundary_misread_prob",
    "page_rber",
    "optimal_vref",
]

N_STATES = 8
N_BOUNDARIES = 7

#: Page types in bit order within a cell (bit 0 = lsb).
PAGE_TYPES = ("lsb", "csb", "msb")

#: Default boundary-to-page split: a 2/3/2 partition of the seven state
#: boundaries, the common TLC arrangement.
DEFAULT_PAGE_BOUNDARIES = (
    ("lsb", (1, 5)),
    ("csb", (2, 4, 6)),
    ("msb", (3, 7)),
)

_SQRT2 = math.sqrt(2.0)


def _gauss_tail(z: float) -> float:
    """P(Z > z) for standard normal Z."""
    return 0.5 * math.erfc(z / _SQRT2)


@dataclass(frozen=True, order=True)
class OperatingCondition:
    """A point in the aging space: data retention age and accumulated wear."""

    retention_age_days: float
    pe_cycles: int

    def __post_init__(self) -> None:
        if self.retention_age_days < 0:
            raise ValueError(f"retention age must be >= 0, got {self.retention_age_days}")
        if self.pe_cycles < 0:
            raise ValueError(f"pe_cycles must be >= 0, got {self.pe_cycles}")

    @property
    def key(self) -> tuple[float, int]:
        return (float(self.retention_age_days), int(self.pe_cycles))


@dataclass(frozen=True)
class StateDistribution:
    """One voltage state: a Gaussian with mean and stdev in mV."""

    mean_mv: float
    stdev_mv: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.mean_mv):
            raise ValueError("state mean must be finite")
        if not (self.stdev_mv > 0 and math.isfinite(self.stdev_mv)):
            raise ValueError(f"state stdev must be positive, got {self.stdev_mv}")


@dataclass(frozen=True)
class VrefSet:
    """The seven read-reference voltages, one per state boundary.

    boundaries[i] separates state i from state i+1 and must be strictly
    increasing across the set.
    """

    boundaries_mv: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.boundaries_mv) != N_BOUNDARIES:
            raise ValueError(f"expected {N_BOUNDARIES} boundaries, got {len(self.boundaries_mv)}")
        for a, b in zip(self.boundaries_mv, self.boundaries_mv[1:]):
            if not a < b:
                raise ValueError("boundary voltages must be strictly increasing")

    def offset(self, offsets_mv: tuple[float, ...]) -> "VrefSet":
        """Return a new set with per-boundary offsets applied."""
        if len(offsets_mv) != N_BOUNDARIES:
            raise ValueError("need one offset per boundary")
        return VrefSet(tuple(v + o for v, o in zip(self.boundaries_mv, offsets_mv)))


@dataclass(frozen=True)
class CellStateModel:
    """Cell behaviour at one operating condition.

    ``states`` are ordered low to high; ``gray_map`` gives the 3-bit code of
    each state (bit 0 = lsb); ``page_levels`` lists, per page type, which
    boundary indices (1-based) that page senses. ``sensing_exp`` is the
    exponent eta of the read-noise inflation (tr_scale)**(-eta) applied when
    sensing time is scaled down.
    """

    states: tuple[StateDistribution, ...]
    gray_map: tuple[int, ...]
    page_levels: tuple[tuple[str, tuple[int, ...]], ...]
    sensing_exp: float

    def __post_init__(self) -> None:
        if len(self.states) != N_STATES:
            raise ValueError(f"expected {N_STATES} states, got {len(self.states)}")
        means = [s.mean_mv for s in self.states]
        for lo, hi in zip(means, means[1:]):
            if not lo < hi:
                raise ValueError("state means must be strictly increasing")
        if sorted(self.gray_map) != list(range(N_STATES)):
            raise ValueError("gray_map must be a permutation of 0..7")
        for a, b in zip(self.gray_map, self.gray_map[1:]):
            if bin(a ^ b).count("1") != 1:
                raise ValueError("adjacent states must differ in exactly one bit")
        if self.sensing_exp < 0:
            raise ValueError("sensing_exp must be >= 0")
        self._check_partition()

    def _check_partition(self) -> None:
        split = dict(self.page_levels)
        if set(split) != set(PAGE_TYPES):
            raise ValueError(f"page_levels must cover exactly {PAGE_TYPES}")
        claimed = [b for bs in split.values() for b in bs]
        if sorted(claimed) != list(range(1, N_BOUNDARIES + 1)):
            raise ValueError("page_levels must partition boundaries 1..7")
        sizes = tuple(len(split[p]) for p in PAGE_TYPES)
        if sizes != (2, 3, 2):
            raise ValueError(f"boundary split must be 2/3/2 across {PAGE_TYPES}, got {sizes}")

    def boundaries_for(self, page_type: str) -> tuple[int, ...]:
        for name, bs in self.page_levels:
            if name == page_type:
                return bs
        raise KeyError(f"unknown page type {page_type!r}")


def _build_gray_map(page_boundaries: tuple[tuple[str, tuple[int, ...]], ...]) -> tuple[int, ...]:
    # Crossing boundary b flips exactly the bit of the page that senses b,
    # so the code sequence is fixed by the boundary split. Erased state
    # (state 0) reads all ones.
    bit_of_page = {name: i for i, name in enumerate(PAGE_TYPES)}
    flip_bit = {}
    for name, bs in page_boundaries:
        for b in bs:
            flip_bit[b] = bit_of_page[name]
    codes = [0b111]
    for b in range(1, N_BOUNDARIES + 1):
        codes.append(codes[-1] ^ (1 << flip_bit[b]))
    return tuple(codes)


@dataclass(frozen=True)
class ModelParams:
    """Free parameters of the cell model (the calibration surface).

    ``base_states`` describes the fresh, rested chip. The aging laws are:

    * retention shift of programmed state i at age a days:
      ``retention_coeff_mv * (i/7) * ln(1 + a / retention_ref_age_days)``
      subtracted from the mean (the erased state, i=0, does not move);
    * wear widening: every stdev is multiplied by
      ``1 + pec_widen_coeff * pe_cycles / 1000``;
    * sensing-time noise: stdevs seen by a read are further multiplied by
      ``tr_scale ** (-sensing_inflation_exp)`` when the sensing interval is
      scaled by ``tr_scale <= 1``.
    """

    base_states: tuple[StateDistribution, ...]
    retention_coeff_mv: float
    retention_ref_age_days: float
    pec_widen_coeff: float
    sensing_inflation_exp: float
    page_boundaries: tuple[tuple[str, tuple[int, ...]], ...] = DEFAULT_PAGE_BOUNDARIES

    def __post_init__(self) -> None:
        if len(self.base_states) != N_STATES:
            raise ValueError(f"expected {N_STATES} base states")
        if self.retention_coeff_mv < 0:
            raise ValueError("retention_coeff_mv must be >= 0")
        if self.retention_ref_age_days <= 0:
            raise ValueError("retention_ref_age_days must be > 0")
        if self.pec_widen_coeff < 0:
            raise ValueError("pec_widen_coeff must be >= 0")
        if self.sensing_inflation_exp < 0:
            raise ValueError("sensing_inflation_exp must be >= 0")

    def replace(self, **kw) -> "ModelParams":
        from dataclasses import replace as _replace

        return _replace(self, **kw)


#: Fresh-chip defaults: states evenly spaced 500 mV apart with 80 mV sigma.
DEFAULT_BASE_STATES = tuple(
    StateDistribution(mean_mv=500.0 * i, stdev_mv=80.0) for i in range(N_STATES)
)


def default_params() -> ModelParams:
    """Uncalibrated starting parameters (aging coefficients are guesses)."""
    return ModelParams(
        base_states=DEFAULT_BASE_STATES,
        retention_coeff_mv=40.0,
        retention_ref_age_days=30.0,
        pec_widen_coeff=0.04,
        sensing_inflation_exp=0.15,
    )


@lru_cache(maxsize=512)
def derive_distributions(params: ModelParams, cond: OperatingCondition) -> CellStateModel:
    """Apply the aging laws to the base states at one operating condition.

    Results are cached (both argument types are frozen value objects), so
    per-read callers pay the derivation once per condition.
    """
    shift_unit = params.retention_coeff_mv * math.log(
        1.0 + cond.retention_age_days / params.retention_ref_age_days
    )
    widen = 1.0 + params.pec_widen_coeff * cond.pe_cycles / 1000.0
    states = []
    for i, s in enumerate(params.base_states):
        mean = s.mean_mv - shift_unit * (i / (N_STATES - 1))
        states.append(StateDistribution(mean_mv=mean, stdev_mv=s.stdev_mv * widen))
    return CellStateModel(
        states=tuple(states),
        gray_map=_build_gray_map(params.page_boundaries),
        page_levels=params.page_boundaries,
        sensing_exp=params.sensing_inflation_exp,
    )


@lru_cache(maxsize=64)
def default_vrefs(params: ModelParams) -> VrefSet:
    """Factory read voltages: the optimal boundaries for the fresh chip."""
    fresh = derive_distributions(params, OperatingCondition(0.0, 0))
    return optimal_vref(fresh, tr_scale=1.0)


def boundary_misread_prob(
    model: CellStateModel, boundary_index: int, vref_mv: float, tr_scale: float = 1.0
) -> float:
    """Probability a random cell is misread across one boundary.

    Each of the eight states is equally likely a priori, so the misread
    probability at boundary b is (1/8) times the sum of two tails: the part
    of the state below b lying above the vref, and the part of the state
    above b lying below it. ``tr_scale`` < 1 inflates both stdevs by
    (tr_scale)**(-eta).

    Args:
        model: derived cell model at the operating condition of interest.
        boundary_index: 1-based boundary, separating states b-1 and b.
        vref_mv: applied read-reference voltage.
        tr_scale: sensing-interval scale in (0, 1].

    Returns:
        Misread probability in [0, 0.25].
    """
    if not 1 <= boundary_index <= N_BOUNDARIES:
        raise ValueError(f"boundary_index must be 1..{N_BOUNDARIES}, got {boundary_index}")
    if not math.isfinite(vref_mv):
        raise ValueError("vref must be finite")
    if not (0.0 < tr_scale <= 1.0):
        raise ValueError(f"tr_scale must be in (0, 1], got {tr_scale}")
    inflate = tr_scale ** (-model.sensing_exp)
    below = model.states[boundary_index - 1]
    above = model.states[boundary_index]
    p_hi = _gauss_tail((vref_mv - below.mean_mv) / (below.stdev_mv * inflate))
    p_lo = _gauss_tail((above.mean_mv - vref_mv) / (above.stdev_mv * inflate))
    return (p_hi + p_lo) / N_STATES


@lru_cache(maxsize=16384)
def page_rber(
    model: CellStateModel, page_type: str, vrefs: VrefSet, tr_scale: float = 1.0
) -> float:
    """Raw bit-error rate of one page type: the sum over its boundaries.

    Only the boundaries sensed by the page contribute; each is evaluated at
    its own reference voltage. Interactions beyond adjacent states are
    negligible at realistic spacings and are ignored. Cached by value: a
    simulation re-reads the same few (model, voltage) points millions of
    times.
    """
    return sum(
        boundary_misread_prob(model, b, vrefs.boundaries_mv[b - 1], tr_scale)
        for b in model.boundaries_for(page_type)
    )


def _golden_min(f, lo: float, hi: float, tol: float) -> float:
    # Golden-section search for the minimum of a unimodal f on [lo, hi].
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def optimal_vref(model: CellStateModel, tr_scale: float = 1.0, tol_mv: float = 0.01) -> VrefSet:
    """Per-boundary read voltages minimising the misread probability.

    Each boundary's objective is unimodal between the two adjacent state
    means, so a golden-section search per boundary suffices. With equal
    stdevs the optimum is the midpoint of the neighbouring means.

    Args:
        model: derived cell model.
        tr_scale: sensing-interval scale the read will use.
        tol_mv: search tolerance; the result is within this of the true
            optimum (well under the 0.1 mV contract).
    """
    best = []
    for b in range(1, N_BOUNDARIES + 1):
        lo = model.states[b - 1].mean_mv
        hi = model.states[b].mean_mv
        best.append(
            _golden_min(lambda v, b=b: boundary_misread_prob(model, b, v, tr_scale), lo, hi, tol_mv)
        )
    return VrefSet(tuple(best))
