"""Exception hierarchy shared by every module."""


class MFSError(Exception):
    """Base class for library errors."""


class ConfigError(MFSError, ValueError):
    """A family, domain, nonlinearity or run configuration violates an invariant."""


class DomainError(MFSError, ValueError):
    """An argument lies outside the domain of an operation."""


class BracketOverflowError(MFSError, OverflowError):
    """No root bracket was found for a monotone scalar equation."""


class ConditionViolation(MFSError):
    """A structural integrability or growth condition fails numerically."""


class GeometryError(MFSError):
    """The energy does not display the mountain-pass geometry."""


class ConvergenceError(MFSError):
    """An iterative solver stopped without meeting its tolerances."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class AccuracyWarning(UserWarning):
    """A numerical estimate stopped before reaching its target accuracy."""
