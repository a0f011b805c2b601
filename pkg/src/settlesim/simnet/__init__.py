"""Seeded discrete-event simulation of a validator network."""
from .config import (Byzantine, ByzantineKind, ComplianceConfig, Crash, FxFeed, LatencyConfig, OracleService,
                     Partition, SimConfig, Stage, TamperAttempt, default_rules, sample_latency)
from .engine import SimMetrics, SimResult, Simulator, inject_fault, run_simulation
from .reconcile import NodeLedger, ReconciliationReport, bilateral_books, reconcile, reconcile_bilateral
from .trace import EventTrace
from .workload import WorkloadProfile, generate_workload, rate_at, shape_exponent

__all__ = [
    "Byzantine", "ByzantineKind", "ComplianceConfig", "Crash", "EventTrace", "FxFeed", "LatencyConfig",
    "NodeLedger", "OracleService", "Partition", "ReconciliationReport", "SimConfig", "SimMetrics", "SimResult",
    "Simulator", "Stage", "TamperAttempt", "WorkloadProfile", "bilateral_books", "default_rules",
    "generate_workload", "inject_fault", "rate_at", "reconcile", "reconcile_bilateral", "run_simulation",
    "sample_latency", "shape_exponent",
]
