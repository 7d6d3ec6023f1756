"""Decode outcomes: deterministic counts, stochastic draws, margins."""

import math

import numpy as np
import pytest

from retrysim.ecc import EccConfig, decode, realize_errors


def test_deterministic_mode_replicates_rounded_expectation():
    ecc = EccConfig(deterministic_mode=True)
    rber = 0.0073
    counts = realize_errors(rber, ecc)
    expect = round(ecc.codeword_payload_bits * rber)
    assert counts.shape == (ecc.codewords_per_page,)
    assert (counts == expect).all()


def test_guardband_adds_sigmas_of_binomial_spread():
    ecc = EccConfig(deterministic_mode=True, guardband_sigmas=6.0)
    rber = 0.005
    n = ecc.codeword_payload_bits
    expect = round(n * rber + 6.0 * math.sqrt(n * rber * (1.0 - rber)))
    assert (realize_errors(rber, ecc) == expect).all()


def test_stochastic_mode_matches_binomial_mean():
    ecc = EccConfig()
    rng = np.random.default_rng(5150)
    rber = 0.004
    draws = np.concatenate([realize_errors(rber, ecc, rng) for _ in range(400)])
    mean = ecc.codeword_payload_bits * rber
    sd = math.sqrt(ecc.codeword_payload_bits * rber * (1 - rber))
    assert abs(draws.mean() - mean) < 4 * sd / math.sqrt(draws.size)


def test_stochastic_mode_requires_rng():
    with pytest.raises(ValueError):
        realize_errors(0.001, EccConfig())


def test_realize_errors_rejects_bad_rber():
    with pytest.raises(ValueError):
        realize_errors(-0.1, EccConfig(deterministic_mode=True))
    with pytest.raises(ValueError):
        realize_errors(1.5, EccConfig(deterministic_mode=True))


def test_decode_succeeds_exactly_up_to_t():
    ecc = EccConfig(correction_capability_t=72)
    at_limit = decode(np.full(16, 72), ecc)
    assert at_limit.success and at_limit.margin == 0
    over = decode(np.array([0] * 15 + [73]), ecc)
    assert not over.success and over.margin == -1


def test_decode_margin_tracks_worst_codeword():
    ecc = EccConfig(correction_capability_t=72)
    counts = np.array([3, 50, 11, 64] + [0] * 12)
    result = decode(counts, ecc)
    assert result.margin == 72 - 64
    assert result.errors_per_codeword == tuple(int(c) for c in counts)


def test_decode_validates_shape_and_sign():
    ecc = EccConfig()
    with pytest.raises(ValueError):
        decode(np.zeros(3), ecc)
    with pytest.raises(ValueError):
        decode(np.array([-1] + [0] * 15), ecc)


def test_ecc_config_validation():
    with pytest.raises(ValueError):
        EccConfig(correction_capability_t=0)
    with pytest.raises(ValueError):
        EccConfig(guardband_sigmas=-1.0)
