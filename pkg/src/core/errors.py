from __future__ import annotations

from enum import Enum
from typing import Any


class ErrorCode(str, Enum):
    DOMAIN = "domain"
    RESOURCE = "resource"
    FORMAT = "format"
    COMPUTATION = "computation"
    CONFIG = "config"
    NON_FINITE = "non_finite"


class TtNetError(Exception):
    code: ErrorCode = ErrorCode.DOMAIN

    def __init__(self, message: str, details: dict[str, Any] | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> dict[str, Any]:
        return {"code": self.code.value, "message": self.message, "details": self.details}


class DomainError(TtNetError, ValueError):
    code = ErrorCode.DOMAIN


class ResourceError(TtNetError, MemoryError):
    code = ErrorCode.RESOURCE


class FormatError(TtNetError):
    code = ErrorCode.FORMAT

    def __init__(
        self, message: str, offset: int | None = None, details: dict[str, Any] | None = None
    ) -> None:
        merged = dict(details or {})
        if offset is not None:
            merged["offset"] = offset
            message = f"{message} (at byte offset {offset})"
        super().__init__(message, merged)
        self.offset = offset


class LabelRangeError(FormatError):
    pass


class ComputationError(TtNetError):
    code = ErrorCode.COMPUTATION


class ConfigError(TtNetError):
    code = ErrorCode.CONFIG

    def __init__(self, message: str, field_paths: list[str] | None = None) -> None:
        paths = list(field_paths or [])
        super().__init__(message, {"field_paths": paths})
        self.field_paths = paths


class NonFiniteLossError(TtNetError):
    code = ErrorCode.NON_FINITE
