"""
Error Handling Tests

Tests for the exception hierarchy, the CLI catch-all handler and run
tracing in log records.
"""

import io
import json
import logging

import pytest

from solid_surrogate.core.errors import (
    ChecksumMismatch,
    CholeskyFailure,
    ConfigError,
    ContractViolation,
    DataError,
    IncompressibleMaterial,
    InvertedElement,
    NonConvergence,
    OptimizationFailure,
    ShapeError,
    SurrogateError,
    TooManyFailures,
    TrainingDivergence,
    TruncatedBlob,
    VersionMismatch,
    error_payload,
    handle_cli_exception,
)
from solid_surrogate.core.tracing import RunIDLogFilter, new_run_id, run_id_var


@pytest.mark.parametrize(
    "exc_type,code,category",
    [
        (ConfigError, 2, "config_error"),
        (IncompressibleMaterial, 2, "config_error"),
        (DataError, 3, "data_error"),
        (ShapeError, 3, "data_error"),
        (ChecksumMismatch, 3, "data_error"),
        (VersionMismatch, 3, "data_error"),
        (TruncatedBlob, 3, "data_error"),
        (ContractViolation, 3, "data_error"),
        (NonConvergence, 4, "non_convergence"),
        (TooManyFailures, 4, "non_convergence"),
        (InvertedElement, 4, "inverted_element"),
        (TrainingDivergence, 5, "training_divergence"),
        (CholeskyFailure, 5, "training_divergence"),
        (OptimizationFailure, 5, "training_divergence"),
    ],
)
def test_exit_codes(exc_type, code, category):
    exc = exc_type("boom")
    assert isinstance(exc, SurrogateError)
    assert exc.exit_code == code
    assert exc.category == category


def test_value_error_compatibility():
    assert issubclass(ShapeError, ValueError)
    assert issubclass(IncompressibleMaterial, ValueError)
    assert issubclass(ContractViolation, ValueError)


def test_context_travels_with_exception():
    assert NonConvergence("x", load_factor=0.3).load_factor == 0.3
    assert InvertedElement("x", element=7).element == 7
    assert TooManyFailures("x", failures=12).failures == 12
    assert CholeskyFailure("x", component=2, stage="gp").component == 2


def test_payload_for_toolkit_error():
    payload = error_payload(DataError("bad blob", stage="load"))
    assert payload == {"error": "data_error", "detail": "bad blob", "stage": "load"}


def test_handler_writes_one_json_line():
    stream = io.StringIO()
    code = handle_cli_exception(NonConvergence("stalled", load_factor=0.5), stream=stream)
    assert code == 4
    lines = stream.getvalue().splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0]) == {
        "error": "non_convergence",
        "detail": "stalled",
        "stage": None,
    }


def test_handler_hides_internal_details():
    stream = io.StringIO()
    code = handle_cli_exception(KeyError("secret path"), stream=stream)
    assert code == 1
    payload = json.loads(stream.getvalue())
    assert payload["error"] == "internal_error"
    assert payload["detail"] == "Internal error"
    assert "secret" not in stream.getvalue()


def test_run_id_reaches_log_records():
    run_id = new_run_id()
    assert len(run_id) == 16
    assert run_id_var.get() == run_id
    record = logging.LogRecord("surrogate.test", logging.INFO, __file__, 1, "msg", None, None)
    assert RunIDLogFilter().filter(record)
    assert record.run_id == run_id
