"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration/domain problems exit
with 2, numerical failures and invariant violations with 3.
"""


class SineGapError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SineGapError):
    """Invalid parameter, grid, or tolerance setup."""


class DomainError(SineGapError):
    """Argument outside the mathematical domain of an operation."""


class NumericalError(SineGapError):
    """A computation produced non-finite values or failed to converge."""


class InvariantViolationError(SineGapError):
    """A guaranteed property failed; indicates an implementation bug."""
