"""Exception types shared across the package.

Every failure that callers are expected to catch derives from CvbError.
The CLI maps CvbError (and file problems) to exit code 1, leaving
exit code 2 for argument errors.
"""


class CvbError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(CvbError):
    """An input value lies outside the domain an operation is defined on."""


class BehindCamera(DomainError):
    """A point with non-positive depth was passed to a projection."""


class ConfigError(CvbError):
    """A parameter combination is invalid (bad window size, tau, ...)."""


class DataError(CvbError):
    """A file or record could not be parsed or fails validation."""


class InsufficientData(CvbError):
    """Too few valid samples to attempt a fit."""


class DegenerateFit(CvbError):
    """The fit is rank-deficient or otherwise has no unique solution."""


class DegenerateConfiguration(CvbError):
    """A point configuration does not constrain the model (e.g. collinear)."""


class NoModelFound(CvbError):
    """Robust estimation exhausted its budget without an acceptable model."""


class EmptyCovisibility(CvbError):
    """A pair has no co-visible pixels, so pair statistics are undefined."""


class InsufficientMatches(CvbError):
    """Fewer correspondences than the minimal solver requires."""


class DegenerateGeometry(CvbError):
    """Matches do not determine an essential matrix (e.g. zero baseline)."""


class AmbiguousDecomposition(CvbError):
    """Cheirality cannot single out one pose candidate."""


class ScaleUnrecoverable(CvbError):
    """No usable depth support to put a metric scale on a translation."""
