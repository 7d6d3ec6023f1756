"""Command-line front end.

The verbs mirror the bring-up order of a real drive study:

1. ``calibrate``    fit the model's aging coefficients to the anchors
2. ``characterize`` tabulate the safe sensing-time scale per condition
3. ``run``          simulate one workload under one policy
4. ``sweep``        run a policy set across operating conditions
5. ``compare``      relative response-time change between two runs

Each artifact-producing verb writes into ``--out`` and echoes the fully
resolved configuration next to its outputs, so any run can be reproduced
from its output directory alone.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .calibrate import CalibrationError, calibrate
from .ecc import EccConfig
from .nand import OperatingCondition
from .retry import BestTrTable, PolicySpec, characterize_best_tr
from .sim import SimConfig, simulate, write_request_csv
from .stats import Summary, aggregate, compare
from .plots import policy_bars, response_cdf, sweep_lines
from .workload import parse_trace, generate

log = logging.getLogger("retrysim")

_DEFAULT_SWEEP_CONDITIONS = "0:0,90:500,180:1000,365:1500"
_DEFAULT_SWEEP_POLICIES = "baseline,history,pr2,pr2ar2,history-pr2ar2"


def _parse_condition(text: str) -> OperatingCondition:
    try:
        days, pec = text.split(":")
        return OperatingCondition(float(days), int(pec))
    except (ValueError, TypeError) as exc:
        raise cfgmod.ConfigError(
            f"condition must look like <days>:<pe_cycles>, got {text!r}"
        ) from exc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_params(args, out: Path):
    """Calibrated model from --params, the out dir, or the config file."""
    explicit = getattr(args, "params", None)
    candidate = Path(explicit) if explicit else out / "params.json"
    if candidate.exists():
        return cfgmod.params_from_json(candidate)
    if explicit:
        raise cfgmod.ConfigError(f"params file not found: {candidate}")
    return None  # resolve() falls back to config scalars or raises


def _echo_config(cfg: dict, out: Path) -> None:
    cfgmod.write_json_atomic(cfg, out / "resolved_config.json")


def _load_trace(cfg: dict, resolved, args):
    override = getattr(args, "trace", None)
    trace_path = override or cfg["workload"]["trace_path"]
    if trace_path is not None:
        return parse_trace(trace_path)
    spec = resolved.workload_spec()
    return generate(spec, seed=int(cfg["workload"]["seed"]))


def cmd_calibrate(args) -> int:
    cfg = cfgmod.load_config(args.config)
    out = _out_dir(args)
    initial = cfgmod.initial_params(cfg)
    params = calibrate(initial)
    cfgmod.params_to_json(params, out / "params.json")
    _echo_config(cfg, out)
    print(
        f"calibrated: retention_coeff_mv={params.retention_coeff_mv:.4f} "
        f"sensing_inflation_exp={params.sensing_inflation_exp:.6f} -> {out / 'params.json'}"
    )
    return 0


def cmd_characterize(args) -> int:
    cfg = cfgmod.load_config(args.config)
    out = _out_dir(args)
    params = _load_params(args, out)
    resolved = cfgmod.resolve(cfg, params)
    ecc = EccConfig(
        **{**cfg["ecc"], "deterministic_mode": True, "guardband_sigmas": max(6.0, cfg["ecc"]["guardband_sigmas"])}
    )
    table = characterize_best_tr(
        resolved.params, resolved.characterization_grid, resolved.retry_table, ecc
    )
    path = out / "best_tr.csv"
    table.to_csv(path)
    _echo_config(cfg, out)
    flagged = sorted(table.flagged)
    if flagged:
        log.warning("conditions beyond ECC even at full sensing time: %s", flagged)
    print(f"characterized {len(table)} conditions -> {path}")
    for key in table.conditions():
        print(f"  {key[0]:6.0f} d, {key[1]:5d} cycles : {table.lookup(OperatingCondition(*key)):.2f}")
    return 0


def _best_tr_for(policy: PolicySpec, args, out: Path) -> BestTrTable | None:
    if not policy.adaptive_tr:
        return None
    explicit = getattr(args, "best_tr", None)
    candidate = Path(explicit) if explicit else out / "best_tr.csv"
    if not candidate.exists():
        raise cfgmod.ConfigError(
            f"policy {policy.label!r} adapts sensing time and needs a "
            f"characterization table; run the characterize step first "
            f"(looked for {candidate})"
        )
    return BestTrTable.from_csv(candidate)


def _run_one(resolved, trace, policy: PolicySpec, best_tr, seed: int):
    sim_cfg = SimConfig(
        params=resolved.params,
        condition=resolved.condition,
        policy=policy,
        ecc=resolved.ecc,
        timing=resolved.timing,
        geometry=resolved.geometry,
        retry_table=resolved.retry_table,
        best_tr=best_tr,
        seed=seed,
    )
    result = simulate(trace, sim_cfg)
    return result, aggregate(result)


def cmd_run(args) -> int:
    cfg = cfgmod.load_config(args.config)
    if args.condition:
        cond = _parse_condition(args.condition)
        cfg["sim"]["condition"] = {
            "retention_days": cond.retention_age_days,
            "pe_cycles": cond.pe_cycles,
        }
    if args.policy:
        cfg["sim"]["policy"] = args.policy
    if args.seed is not None:
        cfg["sim"]["seed"] = args.seed
    out = _out_dir(args)
    params = _load_params(args, out)
    resolved = cfgmod.resolve(cfg, params)
    policy = PolicySpec.from_name(resolved.policy_name)
    best_tr = _best_tr_for(policy, args, out)
    trace = _load_trace(cfg, resolved, args)

    result, summary = _run_one(resolved, trace, policy, best_tr, resolved.sim_seed)
    tag = policy.label
    write_request_csv(result, out / f"requests_{tag}.csv")
    summary.to_json(out / f"summary_{tag}.json")
    clean = [r for r in result.records if r.uncorrectable_pages == 0]
    response_cdf({tag: [r.response_us for r in clean]}, out / f"response_cdf_{tag}.png")
    _echo_config(cfg, out)
    print(
        f"{tag}: {summary.n_requests} requests, mean {summary.mean_response_us:.1f} us, "
        f"p99 {summary.p99_response_us:.1f} us, retry steps/page {summary.mean_retry_steps:.3f}, "
        f"uncorrectable pages {summary.uncorrectable_pages}"
    )
    return 0


SWEEP_CSV_HEADER = (
    "policy",
    "condition",
    "mean_response_us",
    "median_response_us",
    "p99_response_us",
    "mean_retry_steps",
    "uncorrectable_pages",
)


def cmd_sweep(args) -> int:
    cfg = cfgmod.load_config(args.config)
    out = _out_dir(args)
    params = _load_params(args, out)
    resolved = cfgmod.resolve(cfg, params)
    policies = [PolicySpec.from_name(n.strip()) for n in args.policies.split(",") if n.strip()]
    conditions = [_parse_condition(c.strip()) for c in args.conditions.split(",") if c.strip()]
    if not policies or not conditions:
        raise cfgmod.ConfigError("sweep needs at least one policy and one condition")
    best_tr = None
    if any(p.adaptive_tr for p in policies):
        best_tr = _best_tr_for(next(p for p in policies if p.adaptive_tr), args, out)
    trace = _load_trace(cfg, resolved, args)

    rows = []
    for cond in conditions:
        cond_resolved = cfgmod.Resolved(
            {**cfg, "sim": {**cfg["sim"], "condition": {
                "retention_days": cond.retention_age_days, "pe_cycles": cond.pe_cycles}}},
            resolved.params,
        )
        label = f"{cond.retention_age_days:g}d/{cond.pe_cycles}"
        for policy in policies:
            _, summary = _run_one(
                cond_resolved, trace, policy, best_tr if policy.adaptive_tr else None,
                resolved.sim_seed,
            )
            rows.append({
                "policy": policy.label,
                "condition": label,
                "mean_response_us": summary.mean_response_us,
                "median_response_us": summary.median_response_us,
                "p99_response_us": summary.p99_response_us,
                "mean_retry_steps": summary.mean_retry_steps,
                "uncorrectable_pages": summary.uncorrectable_pages,
            })
            log.info("swept %s at %s", policy.label, label)

    csv_path = out / "sweep.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_CSV_HEADER)
        w.writeheader()
        w.writerows(
            {k: (f"{v:.4f}" if isinstance(v, float) else v) for k, v in row.items()}
            for row in rows
        )
    sweep_lines(rows, out / "sweep_mean_response.png", metric="mean_response_us")
    sweep_lines(rows, out / "sweep_retry_steps.png", metric="mean_retry_steps")
    _echo_config(cfg, out)
    print(f"swept {len(policies)} policies x {len(conditions)} conditions -> {csv_path}")
    return 0


def cmd_compare(args) -> int:
    base = Summary.from_json(args.baseline)
    cand = Summary.from_json(args.candidate)
    comp = compare(base, cand)
    print(
        f"{comp.candidate_policy} vs {comp.baseline_policy}: "
        f"mean {comp.mean_reduction_pct:+.1f}%, median {comp.median_reduction_pct:+.1f}%, "
        f"p99 {comp.p99_reduction_pct:+.1f}% response-time reduction"
    )
    if args.out:
        out = _out_dir(args)
        cfgmod.write_json_atomic(comp.as_dict(), out / "comparison.json")
        if args.figure:
            policy_bars([base, cand], out / "comparison.png")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retrysim",
        description="Trace-driven SSD read-path simulator with tunable retry policies.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="chatty logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", help="JSON config file (defaults apply without one)")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory for artifacts")

    p = sub.add_parser("calibrate", help="fit aging coefficients to the model anchors")
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("characterize", help="tabulate safe sensing-time scales per condition")
    common(p)
    p.add_argument("--params", help="calibrated model JSON (default: <out>/params.json)")
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("run", help="simulate one workload under one policy")
    common(p)
    p.add_argument("--params", help="calibrated model JSON (default: <out>/params.json)")
    p.add_argument("--best-tr", dest="best_tr", help="characterization CSV (default: <out>/best_tr.csv)")
    p.add_argument("--policy", help="override sim.policy from the config")
    p.add_argument("--condition", help="override operating condition as <days>:<pe_cycles>")
    p.add_argument("--seed", type=int, help="override sim.seed")
    p.add_argument("--trace", help="request trace CSV (overrides workload section)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a policy set across operating conditions")
    common(p)
    p.add_argument("--params", help="calibrated model JSON (default: <out>/params.json)")
    p.add_argument("--best-tr", dest="best_tr", help="characterization CSV (default: <out>/best_tr.csv)")
    p.add_argument("--policies", default=_DEFAULT_SWEEP_POLICIES, help="comma-separated policy names")
    p.add_argument("--conditions", default=_DEFAULT_SWEEP_CONDITIONS,
                   help="comma-separated <days>:<pe_cycles> pairs")
    p.add_argument("--trace", help="request trace CSV (overrides workload section)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="response-time change between two summary files")
    p.add_argument("baseline", help="summary JSON of the baseline run")
    p.add_argument("candidate", help="summary JSON of the candidate run")
    p.add_argument("--out", help="optional directory for comparison artifacts")
    p.add_argument("--figure", action="store_true", help="also render a bar chart")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (cfgmod.ConfigError, CalibrationError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
