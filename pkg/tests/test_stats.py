"""Aggregation: percentiles, summaries, and policy comparison guards."""

import random

import pytest

from retrysim.ecc import EccConfig
from retrysim.nand import OperatingCondition, default_params
from retrysim.retry import PolicySpec, build_retry_table
from retrysim.sim import Geometry, SimConfig, simulate
from retrysim.stats import Summary, aggregate, compare, percentile
from retrysim.timing import TimingParams
from retrysim.workload import Request, SynthSpec, generate

FRESH = OperatingCondition(0.0, 0)


def _result(policy="baseline", seed=1, trace=None, cond=FRESH):
    cfg = SimConfig(
        params=default_params(),
        condition=cond,
        policy=PolicySpec.from_name(policy),
        ecc=EccConfig(deterministic_mode=True, guardband_sigmas=6.0),
        timing=TimingParams(),
        geometry=Geometry(),
        retry_table=build_retry_table(),
        best_tr=None,
        seed=seed,
    )
    if trace is None:
        trace = [Request(i * 500, "R", i, 1) for i in range(20)]
    return simulate(trace, cfg)


def test_percentile_is_nearest_rank():
    values = list(range(10, 1001, 10))  # 100 samples: 10, 20, ..., 1000
    assert percentile(values, 0.99) == 990.0
    assert percentile(values, 1.0) == 1000.0
    assert percentile(values, 0.5) == 500.0
    assert percentile([42.0], 0.99) == 42.0


def test_percentile_never_interpolates():
    values = [1.0, 2.0, 1000.0]
    assert percentile(values, 0.9) == 1000.0
    assert percentile(values, 0.66) == 2.0


def test_percentile_validates_inputs():
    with pytest.raises(ValueError):
        percentile([], 0.5)
    with pytest.raises(ValueError):
        percentile([1.0], 0.0)
    with pytest.raises(ValueError):
        percentile([1.0], 1.1)


def test_percentile_is_permutation_invariant_after_sorting():
    rng = random.Random(2)
    values = [rng.uniform(0, 100) for _ in range(101)]
    shuffled = values[:]
    rng.shuffle(shuffled)
    for q in (0.5, 0.9, 0.99):
        assert percentile(sorted(values), q) == percentile(sorted(shuffled), q)


def test_aggregate_reports_uncontended_read_statistics():
    result = _result()
    s = aggregate(result)
    assert s.n_requests == 20 and s.n_reads == 20
    assert s.mean_response_us == pytest.approx(85.3)
    assert s.median_response_us == pytest.approx(85.3)
    assert s.p99_response_us == pytest.approx(85.3)
    assert s.mean_retry_steps == pytest.approx(1.0)
    assert s.uncorrectable_requests == 0
    # 20 requests over (last completion - first arrival) microseconds
    span = max(r.completion_us for r in result.records) - 0
    assert s.throughput_rps == pytest.approx(20 / span * 1e6)


def test_aggregate_excludes_uncorrectable_requests_from_latency(calibrated_params, retry_table):
    # A 50-bit corrector at the harshest condition deterministically fails
    # the csb pages (every third page index) while lsb/msb clear.
    cond = OperatingCondition(365.0, 1500)
    cfg = SimConfig(
        params=calibrated_params,
        condition=cond,
        policy=PolicySpec.from_name("baseline"),
        ecc=EccConfig(correction_capability_t=50, deterministic_mode=True, guardband_sigmas=6.0),
        timing=TimingParams(),
        geometry=Geometry(),
        retry_table=retry_table,
        seed=6,
    )
    trace = [Request(i * 10, "R", i * 64, 1) for i in range(60)]
    result = simulate(trace, cfg)
    assert result.uncorrectable_pages == 20
    s = aggregate(result)
    assert s.uncorrectable_requests == 20
    assert s.n_requests == 60
    clean = [r for r in result.records if r.uncorrectable_pages == 0]
    assert s.mean_response_us == pytest.approx(
        sum(r.response_us for r in clean) / len(clean)
    )


def test_aggregate_rejects_empty_results():
    result = _result(trace=[Request(0, "R", 0, 1)])
    empty = type(result)(
        records=(), page_reads=0, page_writes=0, uncorrectable_pages=0,
        rejected_requests=0, config=result.config, seed=result.seed,
        trace_digest=result.trace_digest,
    )
    with pytest.raises(ValueError):
        aggregate(empty)


def test_summary_round_trips_through_json(tmp_path):
    s = aggregate(_result())
    path = tmp_path / "summary.json"
    s.to_json(path)
    assert Summary.from_json(path) == s


def test_compare_reports_percent_reductions():
    trace = [Request(i * 500, "R", i, 1) for i in range(20)]
    base = aggregate(_result("baseline", trace=trace))
    cand = aggregate(_result("pr2", trace=trace))
    comp = compare(base, cand)
    assert comp.baseline_policy == "baseline"
    assert comp.candidate_policy == "pr2"
    # single-step reads: identical latency either way
    assert comp.mean_reduction_pct == pytest.approx(0.0)


def test_compare_refuses_mismatched_contexts():
    base = aggregate(_result(trace=[Request(0, "R", 0, 1)]))
    other = aggregate(_result(trace=[Request(0, "R", 1, 1)]))
    with pytest.raises(ValueError, match="context"):
        compare(base, other)


def test_same_environment_different_policy_shares_context_hash(calibrated_params, retry_table, best_tr):
    spec = SynthSpec(duration_us=50_000, mean_iat_us=300.0, read_ratio=0.9,
                     working_set_blocks=10_000)
    trace = generate(spec, seed=3)
    cond = OperatingCondition(90.0, 500)

    def summarize(policy, use_table):
        cfg = SimConfig(
            params=calibrated_params, condition=cond,
            policy=PolicySpec.from_name(policy),
            ecc=EccConfig(), timing=TimingParams(), geometry=Geometry(),
            retry_table=retry_table, best_tr=best_tr if use_table else None,
            seed=12,
        )
        return aggregate(simulate(trace, cfg))

    base = summarize("baseline", False)
    cand = summarize("history-pr2ar2", True)
    assert base.context_hash == cand.context_hash
    assert base.config_hash != cand.config_hash
