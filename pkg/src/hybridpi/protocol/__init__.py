"""Two-party private inference protocol: sessions, LPHE scheduling, meters."""

from ..wire import Channel, FrameType, Meters, loopback_channels
from .lphe import HeJob, HeJobResult, lphe_schedule, run_he_job, shutdown_pools, warm_pool
from .report import meters_report, report_csv, report_text, write_report
from .runner import (
    ClientOutcome,
    LoopbackOutcome,
    ServerOutcome,
    run_client,
    run_loopback,
    run_pair,
    run_server,
)
from .session import (
    PROTOCOL_VERSION,
    VARIANTS,
    ClientSession,
    OfflineBundle,
    ServerSession,
    SessionConfig,
    Topology,
    normalize_variant,
    relu_circuit,
)

__all__ = [
    "Channel", "FrameType", "Meters", "loopback_channels", "HeJob", "HeJobResult",
    "lphe_schedule", "run_he_job", "shutdown_pools", "warm_pool", "meters_report", "report_csv",
    "report_text", "write_report", "ClientOutcome", "LoopbackOutcome", "ServerOutcome",
    "run_client", "run_loopback", "run_pair", "run_server", "PROTOCOL_VERSION", "VARIANTS",
    "ClientSession", "OfflineBundle", "ServerSession", "SessionConfig", "Topology",
    "normalize_variant", "relu_circuit",
]
