"""Custom exception hierarchy and CLI handler."""

from __future__ import annotations

import json
import logging
import sys
from typing import TextIO

from pydantic import ValidationError

logger = logging.getLogger(__name__)


class LocateException(Exception):
    """Base pipeline exception."""

    exit_code = 4
    code = "locate_error"

    def __init__(self, message: str, details: dict | list | None = None) -> None:
        self.message = message
        self.details = details
        super().__init__(message)


class ConfigException(LocateException):
    """Raised when configuration values are invalid or inconsistent."""

    exit_code = 2
    code = "config_error"


class DataException(LocateException):
    """Raised when a dataset tree or data file violates the expected layout."""

    exit_code = 3
    code = "data_error"


class InputException(LocateException):
    """Raised when an operation receives an argument outside its domain."""

    exit_code = 3
    code = "invalid_input"


class CheckpointException(LocateException):
    """Raised when a checkpoint cannot be read or has an unsupported version."""

    exit_code = 3
    code = "checkpoint_error"


class CapabilityException(LocateException):
    """Raised when a backend lacks a requested capability."""

    exit_code = 4
    code = "unsupported_capability"


def normalize_validation_errors(errors: list[dict]) -> list[dict]:
    normalized: list[dict] = []
    for item in errors:
        normalized.append(
            {
                "loc": [str(part) for part in item.get("loc", ())],
                "message": item.get("msg"),
                "type": item.get("type"),
            },
        )
    return normalized


def config_exception_from_validation(exc: ValidationError) -> ConfigException:
    """Convert settings validation failure into unified config error."""
    return ConfigException(
        "Configuration validation failed",
        details={"errors": normalize_validation_errors(exc.errors())},
    )


def handle_cli_exception(exc: BaseException, stream: TextIO | None = None) -> int:
    """Render exception in unified error shape and return process exit code."""
    target = stream or sys.stderr
    if isinstance(exc, LocateException):
        payload = {"code": exc.code, "message": exc.message, "details": exc.details}
        exit_code = exc.exit_code
    elif isinstance(exc, ValidationError):
        converted = config_exception_from_validation(exc)
        payload = {
            "code": converted.code,
            "message": converted.message,
            "details": converted.details,
        }
        exit_code = converted.exit_code
    else:
        logger.exception("Unhandled error: %s", exc)
        payload = {"code": "internal_error", "message": "Internal failure", "details": None}
        exit_code = LocateException.exit_code

    print(json.dumps({"error": payload}, default=str), file=target)
    return exit_code
