"""Discrete-event simulator for sentinel duty-cycle scheduling in dense
wireless sensor networks, with a PEAS baseline for energy comparisons."""

from .analysis import (
    CoverageGrid,
    MetricsRecord,
    OverheadReport,
    RecoveryEvent,
    RunResult,
    SummaryReport,
    UNRECOVERED,
    compare_runs,
    coverage_fraction,
    overhead_report,
    recovery_latency,
    summarize,
    write_metrics_csv,
)
from .engine import (
    EnergyModel,
    EventKind,
    SimConfig,
    SimError,
    SimEvent,
    World,
    deploy,
    inject_failure,
    run,
    simulate,
)
from .peas import PeasParams, matched_rate, peas_sample_sleep
from .protocol import (
    NodeState,
    ProbeReply,
    ProbeRequest,
    ProtocolError,
    ProtocolParams,
    SensorNode,
    scan_check,
)
from .scheduling import (
    WeibullParams,
    hazard_rate,
    sample_sleep_time,
    update_probe_rate,
    weibull_cdf,
    weibull_survival,
)

__version__ = "0.1.0"

__all__ = [
    "CoverageGrid",
    "EnergyModel",
    "EventKind",
    "MetricsRecord",
    "NodeState",
    "OverheadReport",
    "PeasParams",
    "ProbeReply",
    "ProbeRequest",
    "ProtocolError",
    "ProtocolParams",
    "RecoveryEvent",
    "RunResult",
    "SensorNode",
    "SimConfig",
    "SimError",
    "SimEvent",
    "SummaryReport",
    "UNRECOVERED",
    "WeibullParams",
    "World",
    "compare_runs",
    "coverage_fraction",
    "deploy",
    "hazard_rate",
    "inject_failure",
    "matched_rate",
    "overhead_report",
    "peas_sample_sleep",
    "recovery_latency",
    "run",
    "sample_sleep_time",
    "scan_check",
    "simulate",
    "summarize",
    "update_probe_rate",
    "weibull_cdf",
    "weibull_survival",
    "write_metrics_csv",
]
