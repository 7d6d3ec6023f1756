"""Trace-driven SSD read-path simulator with tunable read-retry policies.

The package models a TLC NAND cell population whose threshold-voltage
distributions drift and widen with retention age, program/erase wear, and
shortened sensing time; ECC decode outcomes per retry-table entry; page
read latencies for sequential and pipelined retry walks; and a
multi-channel, multi-die drive that services request traces under
different retry policies. The usual workflow is calibrate (fit the aging
coefficients), characterize (tabulate safe sensing-time scales), then
simulate and compare policies.
"""

from .calibrate import CalibrationError, CalibrationTargets, calibrate
from .ecc import DecodeResult, EccConfig, decode, realize_errors
from .nand import (
    CellStateModel,
    ModelParams,
    OperatingCondition,
    StateDistribution,
    VrefSet,
    boundary_misread_prob,
    default_params,
    default_vrefs,
    derive_distributions,
    optimal_vref,
    page_rber,
)
from .retry import (
    POLICY_NAMES,
    BestTrTable,
    HistoryStore,
    PolicySpec,
    RetryTable,
    RetryTrace,
    build_retry_table,
    characterize_best_tr,
    deterministic_steps,
    mean_retry_steps,
    resolve_read,
)
from .sim import (
    Geometry,
    PhysAddr,
    RequestRecord,
    SimConfig,
    SimResult,
    map_lba,
    simulate,
    write_request_csv,
)
from .stats import Comparison, Summary, aggregate, compare, percentile
from .timing import (
    TimingParams,
    Timeline,
    build_timeline,
    latency_pipelined,
    latency_sequential,
)
from .workload import (
    PRESETS,
    Request,
    SynthSpec,
    TraceFormatError,
    generate,
    parse_trace,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [
    "BestTrTable",
    "CalibrationError",
    "CalibrationTargets",
    "CellStateModel",
    "Comparison",
    "DecodeResult",
    "EccConfig",
    "Geometry",
    "HistoryStore",
    "ModelParams",
    "OperatingCondition",
    "POLICY_NAMES",
    "PRESETS",
    "PhysAddr",
    "PolicySpec",
    "Request",
    "RequestRecord",
    "RetryTable",
    "RetryTrace",
    "SimConfig",
    "SimResult",
    "StateDistribution",
    "Summary",
    "SynthSpec",
    "Timeline",
    "TimingParams",
    "TraceFormatError",
    "VrefSet",
    "aggregate",
    "boundary_misread_prob",
    "build_retry_table",
    "build_timeline",
    "calibrate",
    "characterize_best_tr",
    "compare",
    "decode",
    "default_params",
    "default_vrefs",
    "derive_distributions",
    "deterministic_steps",
    "generate",
    "latency_pipelined",
    "latency_sequential",
    "map_lba",
    "mean_retry_steps",
    "optimal_vref",
    "page_rber",
    "parse_trace",
    "percentile",
    "resolve_read",
    "simulate",
    "write_request_csv",
    "write_trace",
]
