"""Analytic latency model for priority-arbitrated NoCs under bursty traffic."""

from ._nocperf import (
    ConfigError,
    DomainError,
    InstabilityError,
    ModelBreakdownError,
    NonConvergenceError,
    analyze,
    basic_priority,
    burst_from_scv,
    compare,
    departure_scv,
    estimate_burstiness,
    ggeo_g1_occupancy,
    sample_interarrivals,
    scv_from_burst,
    simulate,
    single_queue_wait,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "InstabilityError",
    "ModelBreakdownError",
    "NonConvergenceError",
    "analyze",
    "basic_priority",
    "burst_from_scv",
    "compare",
    "departure_scv",
    "estimate_burstiness",
    "ggeo_g1_occupancy",
    "sample_interarrivals",
    "scv_from_burst",
    "simulate",
    "single_queue_wait",
]
