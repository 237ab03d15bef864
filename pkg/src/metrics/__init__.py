"""Prometheus metrics for the effective-capacity engine."""

from .metrics import (
    REGISTRY,
    commands_total,
    command_duration,
    mc_slots_simulated_total,
    quadrature_failures_total,
    validation_checks_total,
    export_metrics,
)
from .interceptor import MetricsInterceptor

__all__ = [
    "REGISTRY",
    "MetricsInterceptor",
    "commands_total",
    "command_duration",
    "mc_slots_simulated_total",
    "quadrature_failures_total",
    "validation_checks_total",
    "export_metrics",
]
