"""
Utilities Module
Common utilities for the inflap laboratory.
"""

from .errors import (
    InflapError,
    InvalidParameterError,
    OutOfDomainError,
    SingularPointError,
    InsufficientDataError,
    NumericalFailureError,
    ConfigParseError,
)
from .geometry import calculate_distance, distance_to_set

__all__ = [
    'InflapError',
    'InvalidParameterError',
    'OutOfDomainError',
    'SingularPointError',
    'InsufficientDataError',
    'NumericalFailureError',
    'ConfigParseError',
    'calculate_distance',
    'distance_to_set',
]
