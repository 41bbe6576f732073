"""Structured logging with a run id shared by HTTP requests and CLI runs."""
import json
import logging
import sys
import time
import uuid
from contextlib import contextmanager
from contextvars import ContextVar
from datetime import datetime, timezone
from typing import Callable, Iterator, Optional

from fastapi import Request, Response
from starlette.middleware.base import BaseHTTPMiddleware
from starlette.types import ASGIApp

from app.settings import settings

RUN_ID_HEADER = "X-Request-ID"

# Set per request or per CLI command; session step logs pick it up.
_run_id: ContextVar[Optional[str]] = ContextVar("run_id", default=None)
_command: ContextVar[Optional[str]] = ContextVar("command", default=None)


def current_run_id() -> Optional[str]:
    return _run_id.get()


@contextmanager
def bind_run(command: str, run_id: Optional[str] = None) -> Iterator[str]:
    """Tag every record logged inside the block with a run id and command."""
    run_id = run_id or uuid.uuid4().hex
    run_token = _run_id.set(run_id)
    command_token = _command.set(command)
    try:
        yield run_id
    finally:
        _command.reset(command_token)
        _run_id.reset(run_token)


class RunContextFilter(logging.Filter):
    """Copy the bound run id and command onto each record."""

    def filter(self, record: logging.LogRecord) -> bool:
        if not hasattr(record, "request_id"):
            record.request_id = _run_id.get()
        if not hasattr(record, "command"):
            record.command = _command.get()
        return True


class JSONFormatter(logging.Formatter):
    """One JSON object per line; extra_fields are merged at top level."""

    def format(self, record: logging.LogRecord) -> str:
        entry = {
            "timestamp": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        for key in ("request_id", "command"):
            value = getattr(record, key, None)
            if value is not None:
                entry[key] = value

        entry.update(getattr(record, "extra_fields", {}))

        if record.exc_info:
            entry["exception"] = self.formatException(record.exc_info)

        return json.dumps(entry, default=str)


class RequestLoggingMiddleware(BaseHTTPMiddleware):
    """Bind a run id per request, log start and finish, echo the id back."""

    def __init__(self, app: ASGIApp):
        super().__init__(app)
        self.logger = logging.getLogger("app.requests")

    async def dispatch(self, request: Request, call_next: Callable) -> Response:
        route = f"{request.method} {request.url.path}"
        incoming = request.headers.get(RUN_ID_HEADER)

        with bind_run(request.url.path, incoming) as run_id:
            request.state.request_id = run_id
            fields = {"method": request.method, "path": request.url.path}
            self.logger.info(f"Request started: {route}", extra={"extra_fields": fields})

            started = time.perf_counter()
            try:
                response = await call_next(request)
            except Exception as e:
                fields["duration_ms"] = round((time.perf_counter() - started) * 1000, 2)
                self.logger.error(f"Request failed: {route} - {e}", extra={"extra_fields": fields}, exc_info=True)
                raise

            fields["status_code"] = response.status_code
            fields["duration_ms"] = round((time.perf_counter() - started) * 1000, 2)
            self.logger.info(f"Request completed: {route} - {response.status_code}", extra={"extra_fields": fields})

        response.headers[RUN_ID_HEADER] = run_id
        return response


def setup_logging():
    """Configure the root logger from settings; records go to stderr."""
    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, settings.LOG_LEVEL.upper()))
    root_logger.handlers.clear()

    # stdout carries CLI records
    console_handler = logging.StreamHandler(sys.stderr)
    if settings.LOG_FORMAT == "json":
        console_handler.setFormatter(JSONFormatter())
    else:
        console_handler.setFormatter(
            logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - [%(request_id)s] %(message)s")
        )
    console_handler.addFilter(RunContextFilter())
    root_logger.addHandler(console_handler)

    if settings.LOG_FILE:
        file_handler = logging.FileHandler(settings.LOG_FILE)
        file_handler.setFormatter(JSONFormatter())
        file_handler.addFilter(RunContextFilter())
        root_logger.addHandler(file_handler)

    logging.debug(f"Logging configured: level={settings.LOG_LEVEL}, format={settings.LOG_FORMAT}")
