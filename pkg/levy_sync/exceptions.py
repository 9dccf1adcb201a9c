from __future__ import annotations

from typing import Optional


class LevySyncError(Exception):
    """Base class for every error raised by the library."""


class ParameterError(LevySyncError, ValueError):
    pass


class GridError(ParameterError):
    pass


class DomainError(LevySyncError, ValueError):
    pass


class GridMismatchError(DomainError):
    pass


class DivergenceError(LevySyncError, ArithmeticError):
    def __init__(self, message: str, *, time: float) -> None:
        super().__init__(message)
        self.time = time


class NonConvergenceError(LevySyncError):
    pass


class NotDissipativeError(LevySyncError):
    pass


class CapabilityError(LevySyncError):
    pass


class OracleCapacityError(CapabilityError):
    pass


class ConfigError(LevySyncError, ValueError):
    def __init__(self, message: str, *, field: Optional[str] = None, line: Optional[int] = None) -> None:
        super().__init__(message)
        self.field = field
        self.line = line


__all__ = [
    "CapabilityError",
    "ConfigError",
    "DivergenceError",
    "DomainError",
    "GridError",
    "GridMismatchError",
    "LevySyncError",
    "NonConvergenceError",
    "NotDissipativeError",
    "OracleCapacityError",
    "ParameterError",
]
