"""Command interceptor for Prometheus metrics."""

import time
from typing import Any, Callable

from .metrics import command_duration, commands_total


class MetricsInterceptor:
    """Wraps CLI command handlers and records count and duration per command."""

    def __init__(self, service_name: str):
        self.service_name = service_name

    def wrap(self, command: str, handler: Callable[..., int]) -> Callable[..., int]:
        """Return a handler that reports its outcome to the metrics registry."""

        def wrapper(*args: Any, **kwargs: Any) -> int:
            start_time = time.time()
            status = "error"
            try:
                exit_code = handler(*args, **kwargs)
                status = "ok" if exit_code == 0 else f"exit_{exit_code}"
                return exit_code
            finally:
                duration = time.time() - start_time
                commands_total.labels(
                    service=self.service_name, command=command, status=status
                ).inc()
                command_duration.labels(service=self.service_name, command=command).observe(
                    duration
                )

        return wrapper
