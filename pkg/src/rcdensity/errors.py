"""Exception hierarchy shared by the estimator core and the study tooling."""

from __future__ import annotations


class RCDensityError(RuntimeError):
    """Base class for estimation failures.

    ``exit_code`` is the process status the command-line entry point reports
    when the error escapes a command.
    """

    exit_code: int = 1


class InvalidDataError(RCDensityError):
    """Raised when observations are non-finite, unparsable or missing."""

    exit_code = 3


class SampleSizeError(RCDensityError):
    """Raised when a sample is too small for the requested operation."""

    exit_code = 3


class ParameterError(RCDensityError, ValueError):
    """Raised for out-of-range numerical parameters."""

    exit_code = 2


class InsufficientDataError(RCDensityError):
    """Raised when a rate fit receives fewer sample sizes than it needs."""

    exit_code = 2


class UnsupportedRegimeError(RCDensityError):
    """Raised when tuning is requested for a design tail exponent beta <= 1."""

    exit_code = 4


__all__ = [
    "InsufficientDataError",
    "InvalidDataError",
    "ParameterError",
    "RCDensityError",
    "SampleSizeError",
    "UnsupportedRegimeError",
]
