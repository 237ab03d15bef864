"""Prometheus metrics definitions and textfile export."""

import logging

from prometheus_client import Counter, Histogram, Info, write_to_textfile
from prometheus_client.core import CollectorRegistry

logger = logging.getLogger(__name__)

# Create a custom registry
REGISTRY = CollectorRegistry(auto_describe=True)

# Service info
service_info = Info(
    "service",
    "Service information",
    registry=REGISTRY,
)

# Command metrics
commands_total = Counter(
    "commands_total",
    "Total number of CLI commands executed",
    ["service", "command", "status"],
    registry=REGISTRY,
)

command_duration = Histogram(
    "command_duration_seconds",
    "Duration of CLI commands in seconds",
    ["service", "command"],
    buckets=[0.1, 0.5, 1, 2.5, 5, 10, 30, 60, 120, 300, 900],
    registry=REGISTRY,
)

# Engine metrics
mc_slots_simulated_total = Counter(
    "mc_slots_simulated_total",
    "Total number of Monte Carlo slots simulated",
    registry=REGISTRY,
)

quadrature_failures_total = Counter(
    "quadrature_failures_total",
    "Quadrature calls that reported a convergence problem, by whether the result was kept",
    ["outcome"],
    registry=REGISTRY,
)

validation_checks_total = Counter(
    "validation_checks_total",
    "Oracle-agreement checks by outcome",
    ["check", "outcome"],
    registry=REGISTRY,
)


def export_metrics(path: str, service_name: str, version: str) -> None:
    """Write the registry in Prometheus text format for a node-exporter textfile collector."""
    service_info.info({"name": service_name, "version": version})
    write_to_textfile(path, REGISTRY)
    logger.debug(f"Metrics written to {path}")
