"""Logger module for the effective-capacity engine."""

from .file_logger import FileLogger, init_file_logger, get_file_logger, close_file_logger
from .interceptor import LoggingInterceptor

__all__ = [
    "FileLogger",
    "init_file_logger",
    "get_file_logger",
    "close_file_logger",
    "LoggingInterceptor",
]
