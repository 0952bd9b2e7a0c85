"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`ErgokitError`
so callers can catch the whole family at once. Most also derive from the
matching builtin (``ValueError`` etc.) so generic handlers keep working.
"""


class ErgokitError(Exception):
    """Base class for all package errors."""


class NonSymmetric(ErgokitError, ValueError):
    pass


class NoConvergence(ErgokitError, ArithmeticError):
    pass


class IllConditioned(ErgokitError, ArithmeticError):
    """Raised when a least-squares system is numerically singular."""


class NonPositiveInput(ErgokitError, ValueError):
    pass


class EvenSites(ErgokitError, ValueError):
    pass


class DimensionOverflow(ErgokitError, ValueError):
    pass


class DimensionMismatch(ErgokitError, ValueError):
    pass


class ZeroMatrix(ErgokitError, ValueError):
    pass


class DegenerateSpectrum(ErgokitError, ValueError):
    pass


class DegenerateSpectrumWarning(UserWarning):
    """Emitted when exact degeneracies are dropped or grouped."""


class EmptyGrid(ErgokitError, ValueError):
    pass


class NoIntersection(ErgokitError, ValueError):
    pass


class NonPositiveTime(ErgokitError, ValueError):
    pass


class SiteOutOfRange(ErgokitError, IndexError):
    pass


class WindowTooSmall(ErgokitError, ValueError):
    pass


class ZeroOperator(ErgokitError, ValueError):
    pass


class SequenceTooShort(ErgokitError, ValueError):
    pass


class NotNormalized(ErgokitError, ValueError):
    pass


class CutOutOfRange(ErgokitError, IndexError):
    pass


class NotDensityMatrix(ErgokitError, ValueError):
    pass


class ConfigError(ErgokitError, ValueError):
    """Invalid run configuration; the message names the offending field."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line


class ResourceError(ErgokitError, MemoryError):
    """A run would exceed the configured memory cap."""

    def __init__(self, message, estimate_bytes=None):
        super().__init__(message)
        self.estimate_bytes = estimate_bytes
