"""Exception hierarchy shared by the package.

The CLI maps these onto exit codes, so every failure a user can trigger
should surface as one of them.
"""


class SmwssError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DomainError(SmwssError, ValueError):
    """An argument lies outside the domain of a physical formula."""

    exit_code = 2


class UnitError(SmwssError, ValueError):
    """Quantities with incompatible dimensions were combined."""

    exit_code = 2


class ConfigError(SmwssError, ValueError):
    """A configuration or data file is malformed or out of range."""

    exit_code = 2


class AccuracyError(SmwssError, RuntimeError):
    """A numerical procedure failed to reach its declared tolerance."""

    exit_code = 3


class MatchingError(AccuracyError):
    """No matching distance between the short-range and CP branches."""


class ExtrapolationError(AccuracyError):
    """A tabulated quantity was requested outside its tabulated range."""


class ResourceError(SmwssError, MemoryError):
    """A requested discretization exceeds the allowed size."""

    exit_code = 4


class TrackingWarning(UserWarning):
    """State identities could not be followed unambiguously across a scan."""
