"""
Run Tracing for Log Records

Every CLI invocation gets a short run identifier which is injected into all
log records, so interleaved logs from parallel runs can be told apart.
"""

import logging
import sys
import uuid
from contextvars import ContextVar

# Context variable for the current run ID, accessible anywhere in the call stack
run_id_var: ContextVar[str] = ContextVar("run_id", default="-")

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | run=%(run_id)s | %(message)s"


class RunIDLogFilter(logging.Filter):
    """Logging filter that injects the current run_id into log records."""

    def filter(self, record: logging.LogRecord) -> bool:
        record.run_id = run_id_var.get("-")
        return True


def new_run_id() -> str:
    """Generate and activate a fresh run identifier."""
    run_id = uuid.uuid4().hex[:16]
    run_id_var.set(run_id)
    return run_id


def configure_logging(level: str = "INFO") -> None:
    """
    Configure process-wide logging for the CLI.

    Parameters
    ----------
    level : str
        Logging level name (DEBUG, INFO, WARNING, ERROR, CRITICAL).
    """
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        datefmt="%Y-%m-%dT%H:%M:%S",
        stream=sys.stderr,
        force=True,
    )

    # The filter sits on the handlers so records from every logger get run_id.
    run_filter = RunIDLogFilter()
    for handler in logging.getLogger().handlers:
        handler.addFilter(run_filter)
