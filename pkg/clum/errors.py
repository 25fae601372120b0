from __future__ import annotations


class ClumError(Exception):
    """Base class for every error raised by the pricing engine."""

    exit_code = 4


class DomainError(ClumError, ValueError):
    """Input outside the domain of an operation (bad index, malformed ledger)."""

    exit_code = 2


class SingularityError(DomainError):
    """Cost value at or below the maximum payout, where prices are undefined."""


class CapacityError(ClumError):
    """Instance too large for a brute-force or enumeration path."""

    exit_code = 3


class NumericError(ClumError, ArithmeticError):
    """Root finding did not converge or a precision guard tripped."""

    exit_code = 4

    def __init__(self, message: str, bracket: tuple[float, float] | None = None):
        super().__init__(message)
        self.bracket = bracket


class SamplingError(ClumError):
    """Rejection sampler exhausted its attempt budget."""

    exit_code = 4
