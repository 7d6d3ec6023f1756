"""JSON run configuration and on-disk artifacts.

A config file is a JSON object with up to seven sections -- ``model``,
``ecc``, ``timing``, ``geometry``, ``retry``, ``workload``, ``sim`` --
each deep-merged over the defaults below. Unknown sections or keys are
errors: a typo should fail the run, not silently fall back to a default.

The two aging coefficients in ``model`` default to null. Simulating or
characterizing with them unset raises, with a message that names the
``calibrate`` step; ``calibrate`` writes the fitted model to
``params.json``, which later steps load. All artifact writes go through
an atomic replace so a crashed run never leaves a half-written file.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import asdict

from .ecc import EccConfig
from .nand import (
    ModelParams,
    OperatingCondition,
    StateDistribution,
    default_params,
)
from .retry import POLICY_NAMES, RetryTable, build_retry_table
from .sim import Geometry
from .timing import TimingParams
from .workload import PRESETS, SynthSpec

__all__ = [
    "DEFAULT_CONFIG",
    "ConfigError",
    "Resolved",
    "initial_params",
    "load_config",
    "resolve",
    "params_to_json",
    "params_from_json",
    "write_json_atomic",
]


class ConfigError(ValueError):
    pass


DEFAULT_CONFIG: dict = {
    "model": {
        "retention_coeff_mv": None,
        "sensing_inflation_exp": None,
        "retention_ref_age_days": 30.0,
        "pec_widen_coeff": 0.04,
    },
    "ecc": {
        "correction_capability_t": 72,
        "codeword_payload_bits": 8192,
        "codewords_per_page": 16,
        "deterministic_mode": False,
        "guardband_sigmas": 0.0,
    },
    "timing": {
        "t_r_us": 61.0,
        "t_x_us": 18.3,
        "t_e_us": 6.0,
        "t_prog_us": 660.0,
        "t_rst_us": 5.0,
        "cache_move_us": 0.0,
        "free_speculative_abort": False,
    },
    "geometry": {
        "channels": 8,
        "chips_per_channel": 4,
        "dies_per_chip": 2,
        "page_size_kib": 16,
        "pages_per_block": 256,
        "blocks_per_die": 512,
    },
    "retry": {
        "step_mv": 10.0,
        "max_steps": 50,
        "graded": True,
    },
    "workload": {
        "preset": "read90",
        "trace_path": None,
        "seed": 7,
    },
    "sim": {
        "condition": {"retention_days": 365.0, "pe_cycles": 1500},
        "policy": "baseline",
        "seed": 11,
        "characterization_grid": {
            "retention_days": [0.0, 30.0, 90.0, 180.0, 365.0],
            "pe_cycles": [0, 500, 1000, 1500],
        },
    },
}


def _merge(defaults: dict, override: dict, path: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be an object")
            out[key] = _merge(defaults[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None) -> dict:
    """Defaults deep-merged with the JSON file at ``path`` (if given)."""
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    with open(path) as fh:
        try:
            user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config root must be a JSON object")
    return _merge(DEFAULT_CONFIG, user, "")


class Resolved:
    """Config sections turned into the value objects the library uses."""

    def __init__(self, cfg: dict, params: ModelParams | None):
        self.raw = cfg
        self.params = params
        self.ecc = EccConfig(**cfg["ecc"])
        self.timing = TimingParams(**cfg["timing"])
        self.geometry = Geometry(**cfg["geometry"])
        self.retry_table: RetryTable = build_retry_table(**cfg["retry"])
        cond = cfg["sim"]["condition"]
        self.condition = OperatingCondition(
            float(cond["retention_days"]), int(cond["pe_cycles"])
        )
        grid = cfg["sim"]["characterization_grid"]
        self.characterization_grid = tuple(
            OperatingCondition(float(d), int(p))
            for d in grid["retention_days"]
            for p in grid["pe_cycles"]
        )
        self.policy_name: str = cfg["sim"]["policy"]
        if self.policy_name not in POLICY_NAMES:
            raise ConfigError(
                f"unknown policy {self.policy_name!r}; choose from {sorted(POLICY_NAMES)}"
            )
        self.sim_seed: int = int(cfg["sim"]["seed"])

    def workload_spec(self) -> SynthSpec | None:
        """The synthetic-workload spec, or None when a trace file is set."""
        wl = self.raw["workload"]
        if wl["trace_path"] is not None:
            return None
        preset = wl["preset"]
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown workload preset {preset!r}; choose from {sorted(PRESETS)}"
            )
        return PRESETS[preset]


def resolve(cfg: dict, params: ModelParams | None = None) -> Resolved:
    """Validate a merged config and build the library objects.

    ``params`` supplies a calibrated model (e.g. loaded from the
    ``calibrate`` artifact). Without one, the model section must carry
    both aging coefficients or resolution fails.
    """
    model = cfg["model"]
    if params is None:
        if model["retention_coeff_mv"] is None or model["sensing_inflation_exp"] is None:
            raise ConfigError(
                "model.retention_coeff_mv / model.sensing_inflation_exp are unset; "
                "run the calibrate step first (or set both explicitly)"
            )
        params = default_params().replace(
            retention_coeff_mv=float(model["retention_coeff_mv"]),
            sensing_inflation_exp=float(model["sensing_inflation_exp"]),
            retention_ref_age_days=float(model["retention_ref_age_days"]),
            pec_widen_coeff=float(model["pec_widen_coeff"]),
        )
    try:
        return Resolved(cfg, params)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config value: {exc}") from exc


def initial_params(cfg: dict) -> ModelParams:
    """Starting model for calibration: config knobs over the defaults."""
    model = cfg["model"]
    base = default_params()
    return base.replace(
        retention_ref_age_days=float(model["retention_ref_age_days"]),
        pec_widen_coeff=float(model["pec_widen_coeff"]),
    )


def write_json_atomic(obj, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def params_to_json(params: ModelParams, path) -> None:
    """Persist a full model (including base states) losslessly."""
    write_json_atomic(asdict(params), path)


def params_from_json(path) -> ModelParams:
    with open(path) as fh:
        raw = json.load(fh)
    return ModelParams(
        base_states=tuple(StateDistribution(**s) for s in raw["base_states"]),
        retention_coeff_mv=raw["retention_coeff_mv"],
        retention_ref_age_days=raw["retention_ref_age_days"],
        pec_widen_coeff=raw["pec_widen_coeff"],
        sensing_inflation_exp=raw["sensing_inflation_exp"],
        page_boundaries=tuple(
            (name, tuple(bounds)) for name, bounds in raw["page_boundaries"]
        ),
    )
