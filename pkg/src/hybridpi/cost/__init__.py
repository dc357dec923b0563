"""Analytic cost model and the precompute-buffer arrival simulator."""

from .arrivals import (
    ArrivalSimConfig,
    ArrivalSimResult,
    arrival_recurrence,
    arrival_sim,
    arrival_times,
    rate_sweep,
)
from .model import (
    GB,
    KB,
    CostReport,
    LinkProfile,
    WorkloadProfile,
    WsaResult,
    alpha0_for_reduction,
    calibrate_efficiency,
    comm_latency,
    latency_breakdown,
    link_from_constants,
    load_constants,
    storage_cost,
    traffic,
    workload_from_constants,
    wsa_alpha,
    wsa_optimize,
)
from .report import cost_report

__all__ = [
    "ArrivalSimConfig", "ArrivalSimResult", "arrival_recurrence", "arrival_sim", "arrival_times",
    "rate_sweep", "GB", "KB", "CostReport", "LinkProfile", "WorkloadProfile", "WsaResult",
    "alpha0_for_reduction", "calibrate_efficiency", "comm_latency", "latency_breakdown",
    "link_from_constants", "load_constants", "storage_cost", "traffic", "workload_from_constants",
    "wsa_alpha", "wsa_optimize", "cost_report",
]
