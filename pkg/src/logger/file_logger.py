"""JSON-lines trace file for command runs and validation checks - compatible with Promtail/Loki."""

import json
import threading
from datetime import datetime
from pathlib import Path
from typing import Any, Optional, TextIO


class FileLogger:
    """Appends one JSON object per event to ``<log_dir>/<date>-<service>.json``."""

    def __init__(self, service_name: str, log_dir: str):
        self.service_name = service_name
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self.path = self.log_dir / f"{datetime.now():%Y-%m-%d}-{service_name}.json"
        self._lock = threading.Lock()
        self._file: Optional[TextIO] = self.path.open("a", encoding="utf-8")

    def _write(self, event: str, data: dict[str, Any]) -> None:
        entry = {
            "timestamp": datetime.now().isoformat(),
            "service_name": self.service_name,
            "event": event,
            **data,
        }
        line = json.dumps(entry, ensure_ascii=False, default=str)
        with self._lock:
            if self._file is not None:
                self._file.write(line + "\n")
                self._file.flush()

    def write_trace(self, data: dict[str, Any]) -> None:
        """One finished CLI command."""
        self._write("command", data)

    def write_check(self, name: str, outcome: str, detail: str) -> None:
        """One validation check."""
        self._write("check", {"check": name, "outcome": outcome, "detail": detail})

    def close(self) -> None:
        with self._lock:
            if self._file is not None:
                self._file.close()
                self._file = None


_global_logger: Optional[FileLogger] = None
_logger_lock = threading.Lock()


def init_file_logger(service_name: str, log_dir: str) -> FileLogger:
    """Open the process-wide trace file; later calls return the same instance."""
    global _global_logger

    with _logger_lock:
        if _global_logger is None:
            _global_logger = FileLogger(service_name, log_dir)

    return _global_logger


def get_file_logger() -> Optional[FileLogger]:
    return _global_logger


def close_file_logger() -> None:
    """Close and forget the global file logger."""
    global _global_logger

    with _logger_lock:
        if _global_logger is not None:
            _global_logger.close()
            _global_logger = None
