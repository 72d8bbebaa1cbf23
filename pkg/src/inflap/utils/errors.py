"""
Error types shared by every inflap module.
"""

from typing import Optional


class InflapError(Exception):
    """Base class for all errors raised by inflap."""


class InvalidParameterError(InflapError, ValueError):
    """A parameter is outside its admissible range."""


class OutOfDomainError(InflapError, ValueError):
    """A node, ball or point does not lie where the operation needs it."""


class SingularPointError(InflapError, ValueError):
    """An analytic quantity was requested on an oracle's singular set."""


class InsufficientDataError(InflapError, ValueError):
    """Not enough usable samples to fit or measure anything."""


class NumericalFailureError(InflapError, RuntimeError):
    """The solver produced a non-finite value."""


class ConfigParseError(InflapError, ValueError):
    """An experiment config could not be parsed or validated."""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        self.message = message
        self.line = line
        self.key = key
        location = []
        if line is not None:
            location.append(f"line {line}")
        if key is not None:
            location.append(f"key '{key}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")
