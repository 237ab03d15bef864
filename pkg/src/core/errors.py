"""Exception hierarchy shared by the analytical and simulation modules."""

from typing import Optional


class EngineError(Exception):
    """Base class for every error raised by the engine."""


class ParameterError(EngineError):
    """A SystemParams invariant is violated."""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class ConfigError(EngineError):
    """Experiment configuration cannot be used (bad grid, undersampling, unreadable file)."""


class DomainError(EngineError, ValueError):
    """A formula was evaluated outside its domain."""


class QuadratureError(EngineError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, estimate: float, error_estimate: Optional[float]):
        self.estimate = estimate
        self.error_estimate = error_estimate
        super().__init__(f"{message} (estimate={estimate!r}, error={error_estimate!r})")


class ModeMismatchError(EngineError):
    """Probability and MGF modes are paired inconsistently."""


class ConvergenceError(EngineError):
    """An iterative method stopped before meeting its tolerance."""
