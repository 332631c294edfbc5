"""Exception types raised across the package."""


class KinkfieldError(Exception):
    """Base class for all package errors."""


class DimensionError(KinkfieldError, ValueError):
    """Tensor extents do not line up."""


class ValidationError(KinkfieldError, ValueError):
    """A model or run configuration is out of range."""


class NumericError(KinkfieldError, ArithmeticError):
    """Non-finite values appeared in a computation."""


class ConditioningError(KinkfieldError, ArithmeticError):
    """A metric (normalisation) matrix is too singular to use."""


class ConvergenceError(KinkfieldError, RuntimeError):
    """An iterative method hit its iteration cap."""


class SizeError(KinkfieldError, ValueError):
    """A dense object would exceed the configured size cap."""


class UnsupportedGaugeError(KinkfieldError, ValueError):
    """Gauge fixing was requested on a periodic (traced) state."""


class StaleEnvironmentError(KinkfieldError, RuntimeError):
    """Cached environments no longer match the state they were built from."""


class DomainError(KinkfieldError, ValueError):
    """A function was evaluated outside its domain."""


class ExtractionError(KinkfieldError, ValueError):
    """No usable mass could be extracted from a correlator."""


class PlateauNotFoundError(KinkfieldError, ValueError):
    """No plateau window exists; carries the full mass profile."""

    def __init__(self, message, profile):
        super().__init__(message)
        self.profile = profile


class FitError(KinkfieldError, ValueError):
    """Least-squares fit failed; carries the residuals if any."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class TruncationWarning(UserWarning):
    """The local oscillator truncation is likely too small for the expected field."""


class SectorWarning(UserWarning):
    """A kink-mass estimate came out negative beyond tolerance."""
