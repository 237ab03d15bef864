"""Command interceptor for JSON trace logging - compatible with Promtail/Loki."""

import json
import logging
import time
import uuid
from typing import Any, Callable, Optional

from .file_logger import get_file_logger

logger = logging.getLogger(__name__)


class LoggingInterceptor:
    """Wraps CLI command handlers and writes one JSON trace per invocation."""

    def wrap(
        self,
        command: str,
        handler: Callable[..., int],
        arguments: Optional[dict] = None,
    ) -> Callable[..., int]:
        """Return a handler that traces its arguments, duration and outcome."""

        def wrapper(*args: Any, **kwargs: Any) -> int:
            run_id = str(uuid.uuid4())
            start_time = time.time()
            error_msg = None
            exit_code = None

            try:
                exit_code = handler(*args, **kwargs)
                return exit_code
            except Exception as e:
                error_msg = str(e)
                raise
            finally:
                duration_ms = int((time.time() - start_time) * 1000)
                self._log_command(
                    run_id=run_id,
                    command=command,
                    arguments=arguments,
                    duration_ms=duration_ms,
                    exit_code=exit_code,
                    error=error_msg,
                )

        return wrapper

    def _log_command(
        self,
        run_id: str,
        command: str,
        arguments: Optional[dict],
        duration_ms: int,
        exit_code: Optional[int],
        error: Optional[str] = None,
    ) -> None:
        """Log command to file logger."""
        file_logger = get_file_logger()

        trace_data = {
            "run_id": run_id,
            "command": command,
            "duration_ms": duration_ms,
            "success": exit_code == 0 and error is None,
            "exit_code": exit_code,
        }

        if arguments:
            # Filter empty values
            args = {k: v for k, v in arguments.items() if v not in (None, "", [], {})}
            if args:
                trace_data["arguments"] = args

        if error:
            trace_data["error"] = error

        if file_logger is not None:
            file_logger.write_trace(trace_data)
        else:
            logger.debug(json.dumps(trace_data, ensure_ascii=False, default=str))
