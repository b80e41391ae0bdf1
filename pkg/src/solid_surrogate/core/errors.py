"""
Global Error Handling

This module defines the exception hierarchy shared by every stage of the
surrogate toolkit and the single catch-all used by the command-line driver.

Design Goals
------------
- Every failure maps to a stable, machine-readable category and exit code
- Numerical context (load factor, element index, latent component) travels
  with the exception instead of being buried in log text
- Full tracebacks are logged internally, never printed as the error payload
"""

from __future__ import annotations

import json
import logging
import sys
from typing import Any, Dict, Optional, TextIO

logger = logging.getLogger("surrogate.errors")


# ---------------------------------------------------------------------
# Exception Hierarchy
# ---------------------------------------------------------------------

class SurrogateError(RuntimeError):
    """Base class for all toolkit failures."""

    category: str = "internal_error"
    exit_code: int = 1

    def __init__(self, message: str = "", *, stage: Optional[str] = None) -> None:
        super().__init__(message)
        self.stage = stage


class ConfigError(SurrogateError):
    """Raised when a configuration value is missing, malformed or inconsistent."""

    category = "config_error"
    exit_code = 2


class IncompressibleMaterial(ConfigError, ValueError):
    """Raised when a Poisson ratio of 0.5 or more is requested."""


class DataError(SurrogateError):
    """Raised when stored or supplied data cannot be used."""

    category = "data_error"
    exit_code = 3


class ShapeError(DataError, ValueError):
    """Raised when an array does not have the dimension an operation expects."""


class ChecksumMismatch(DataError):
    """Raised when a stored blob does not hash to its manifest checksum."""


class VersionMismatch(DataError):
    """Raised when a container was written with an unsupported format version."""


class TruncatedBlob(DataError):
    """Raised when a blob holds fewer (or more) bytes than its manifest declares."""


class ContractViolation(DataError, ValueError):
    """Raised when an input breaks an operation precondition (e.g. negative variance)."""


class NonConvergence(SurrogateError):
    """Raised when the incremental Newton solve cannot reach the full load."""

    category = "non_convergence"
    exit_code = 4

    def __init__(self, message: str = "", *, load_factor: float = 0.0, **kwargs: Any) -> None:
        super().__init__(message, **kwargs)
        self.load_factor = load_factor


class InvertedElement(SurrogateError):
    """Raised when a quadrature point reaches a non-positive Jacobian determinant."""

    category = "inverted_element"
    exit_code = 4

    def __init__(self, message: str = "", *, element: Optional[int] = None, **kwargs: Any) -> None:
        super().__init__(message, **kwargs)
        self.element = element


class TooManyFailures(SurrogateError):
    """Raised when more than half of the attempted load cases fail to converge."""

    category = "non_convergence"
    exit_code = 4

    def __init__(self, message: str = "", *, failures: int = 0, **kwargs: Any) -> None:
        super().__init__(message, **kwargs)
        self.failures = failures


class TrainingDivergence(SurrogateError):
    """Raised when the autoencoder loss becomes non-finite."""

    category = "training_divergence"
    exit_code = 5


class CholeskyFailure(SurrogateError):
    """Raised when K + sigma^2 I stays indefinite after jitter escalation."""

    category = "training_divergence"
    exit_code = 5

    def __init__(
        self, message: str = "", *, component: Optional[int] = None, **kwargs: Any
    ) -> None:
        super().__init__(message, **kwargs)
        self.component = component


class OptimizationFailure(SurrogateError):
    """Raised when no hyperparameter restart produced a usable GP."""

    category = "training_divergence"
    exit_code = 5

    def __init__(
        self, message: str = "", *, component: Optional[int] = None, **kwargs: Any
    ) -> None:
        super().__init__(message, **kwargs)
        self.component = component


# ---------------------------------------------------------------------
# Public Exception Handlers
# ---------------------------------------------------------------------

def error_payload(exc: BaseException) -> Dict[str, Any]:
    """
    Build the deterministic error record reported for *exc*.

    Parameters
    ----------
    exc : BaseException
        Any exception, inside or outside the toolkit hierarchy.

    Returns
    -------
    Dict[str, Any]
        ``{"error": category, "detail": message, "stage": stage}``.
    """
    if isinstance(exc, SurrogateError):
        return {
            "error": exc.category,
            "detail": str(exc),
            "stage": exc.stage,
        }
    return {
        "error": "internal_error",
        "detail": "Internal error",
        "stage": None,
    }


def handle_cli_exception(exc: BaseException, stream: Optional[TextIO] = None) -> int:
    """
    Catch-all handler for exceptions escaping a CLI command.

    Behavior
    --------
    - Logs the full exception stack trace for internal diagnostics.
    - Writes one JSON line with the error category to *stream* (stderr).
    - Returns the exit code the process should terminate with.

    Parameters
    ----------
    exc : BaseException
        The uncaught exception instance.

    stream : Optional[TextIO]
        Destination for the machine-readable error line. Defaults to stderr.

    Returns
    -------
    int
        Stable exit code (1 for exceptions outside the hierarchy).
    """
    if isinstance(exc, SurrogateError):
        logger.error("Command failed (%s): %s", exc.category, exc, exc_info=exc)
        code = exc.exit_code
    else:
        logger.exception("Unhandled exception during command", exc_info=exc)
        code = 1

    out = stream if stream is not None else sys.stderr
    out.write(json.dumps(error_payload(exc), sort_keys=True) + "\n")
    out.flush()
    return code
