"""Hard-decision block ECC over the codewords of one page.

A 16-KiB page holds 16 codewords of 1 KiB payload each; the decoder
corrects up to t bit errors per codeword. A page read succeeds iff every
codeword is within t. Error counts can be realized stochastically
(binomial per codeword) or deterministically (expected count plus a
guardband of standard deviations, for worst-case characterization).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["EccConfig", "DecodeResult", "realize_errors", "decode"]


@dataclass(frozen=True)
class EccConfig:
    correction_capability_t: int = 72
    codeword_payload_bits: int = 8192
    codewords_per_page: int = 16
    deterministic_mode: bool = False
    guardband_sigmas: float = 0.0

    def __post_init__(self) -> None:
        if self.correction_capability_t <= 0:
            raise ValueError("correction capability t must be positive")
        if self.codeword_payload_bits <= 0:
            raise ValueError("codeword payload must be positive")
        if self.codewords_per_page <= 0:
            raise ValueError("codewords per page must be positive")
        if self.guardband_sigmas < 0:
            raise ValueError("guardband must be >= 0")


@dataclass(frozen=True)
class DecodeResult:
    """Outcome of decoding one page.

    ``margin`` is t minus the worst codeword's error count: >= 0 on
    success, negative by the shortfall on failure.
    """

    success: bool
    errors_per_codeword: tuple[int, ...]
    margin: int


def realize_errors(rber: float, ecc: EccConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Realize per-codeword error counts for a page read at the given RBER.

    Stochastic mode draws one binomial count per codeword; deterministic
    mode replicates ``round(n*p + guardband*sqrt(n*p*(1-p)))`` across all
    codewords. ``rng`` is required only in stochastic mode.
    """
    if not (0.0 <= rber <= 1.0):
        raise ValueError(f"rber must be in [0, 1], got {rber}")
    n = ecc.codeword_payload_bits
    if ecc.deterministic_mode:
        count = int(round(n * rber + ecc.guardband_sigmas * math.sqrt(n * rber * (1.0 - rber))))
        return np.full(ecc.codewords_per_page, count, dtype=np.int64)
    if rng is None:
        raise ValueError("stochastic mode needs an rng")
    return rng.binomial(n, rber, size=ecc.codewords_per_page).astype(np.int64)


def decode(error_counts: np.ndarray, ecc: EccConfig) -> DecodeResult:
    """Decode one page: success iff the worst codeword is within t."""
    counts = np.asarray(error_counts)
    if counts.shape != (ecc.codewords_per_page,):
        raise ValueError(
            f"expected {ecc.codewords_per_page} codeword counts, got shape {counts.shape}"
        )
    if (counts < 0).any():
        raise ValueError("error counts must be >= 0")
    worst = int(counts.max())
    t = ecc.correction_capability_t
    return DecodeResult(
        success=worst <= t,
        errors_per_codeword=tuple(int(c) for c in counts),
        margin=t - worst,
    )
