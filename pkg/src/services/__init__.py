# Experiment runners
from .experiments import ExperimentService, SweepSpec, SweepTable, SweepVariable, ValidationReport

__all__ = ["ExperimentService", "SweepSpec", "SweepTable", "SweepVariable", "ValidationReport"]
