from __future__ import annotations

import io
import json

import pytest
from pydantic import BaseModel, ValidationError

from locate.shared.exceptions import (
    CapabilityException,
    CheckpointException,
    ConfigException,
    DataException,
    InputException,
    LocateException,
    handle_cli_exception,
)


def _render(exc: BaseException) -> tuple[int, dict]:
    stream = io.StringIO()
    exit_code = handle_cli_exception(exc, stream)
    return exit_code, json.loads(stream.getvalue())


@pytest.mark.parametrize(
    ("exc_type", "code", "exit_code"),
    [
        (ConfigException, "config_error", 2),
        (DataException, "data_error", 3),
        (InputException, "invalid_input", 3),
        (CheckpointException, "checkpoint_error", 3),
        (CapabilityException, "unsupported_capability", 4),
    ],
)
def test_pipeline_exception_uses_unified_error_envelope(
    exc_type: type[LocateException],
    code: str,
    exit_code: int,
) -> None:
    assert _render(exc_type("Rule failed", details={"rule": "demo"})) == (
        exit_code,
        {"error": {"code": code, "message": "Rule failed", "details": {"rule": "demo"}}},
    )


def test_validation_error_is_reported_as_config_error() -> None:
    class Sample(BaseModel):
        value: int

    with pytest.raises(ValidationError) as exc_info:
        Sample(value="not-an-int")

    exit_code, payload = _render(exc_info.value)

    assert exit_code == 2
    assert payload["error"]["code"] == "config_error"
    assert payload["error"]["message"] == "Configuration validation failed"
    assert payload["error"]["details"]["errors"][0]["loc"] == ["value"]


def test_unhandled_exception_uses_internal_error_shape() -> None:
    assert _render(RuntimeError("boom")) == (
        4,
        {"error": {"code": "internal_error", "message": "Internal failure", "details": None}},
    )
