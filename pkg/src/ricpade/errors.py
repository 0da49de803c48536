"""Exception types shared across the package."""


class RicpadeError(Exception):
    """Base class for all package errors."""


class ConfigError(RicpadeError):
    """Invalid configuration: unknown key, missing field, malformed number."""


class UnsupportedSingularityError(RicpadeError):
    """The centrifugal coefficient admits no real regularizing exponent."""


class NonConvergenceError(RicpadeError):
    """Newton iteration exhausted its budget.

    Carries the last iterate and, when raised from a sequence run, the
    partial sequence accumulated so far.
    """

    def __init__(self, message, last_iterate=None, partial=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.partial = partial


class PrecisionExhaustedError(RicpadeError):
    """Escalation ladder would exceed the configured precision cap."""


class StructureError(RicpadeError):
    """Measured root structure contradicts expectations (e.g. a
    multiplicity fit that lands nowhere near an integer)."""


class BoundaryError(RicpadeError):
    """Parameter sits exactly on a structural boundary (double root)."""


class DeflationCollisionError(RicpadeError):
    """Newton iterate equals the deflation location; re-seed required."""
