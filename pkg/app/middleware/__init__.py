"""Middleware for structured request logging."""
from .logging import RequestLoggingMiddleware, bind_run, current_run_id, setup_logging

__all__ = [
    "RequestLoggingMiddleware",
    "bind_run",
    "current_run_id",
    "setup_logging",
]
