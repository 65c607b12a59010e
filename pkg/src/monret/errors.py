"""Exception and warning types shared across the package."""


class MonretError(Exception):
    """Base class for all package errors."""


class ResonanceError(MonretError):
    """Raised when a linear system is (nearly) singular because of a resonance.

    ``condition`` carries a condition-number estimate (or ``inf``) and
    ``radius`` the spectral radius of the propagator when known.
    """

    def __init__(self, message, condition=None, radius=None):
        super().__init__(message)
        self.condition = condition
        self.radius = radius


class NumericalHealthError(MonretError):
    """Raised when an internal consistency check fails beyond tolerance."""


class TruncationError(NumericalHealthError):
    """Raised when a truncated series cannot reach the requested tail bound."""


class UndefinedWindingError(MonretError):
    """Raised when a winding number is ill-defined (curve touches the origin)."""


class ConfigError(MonretError, ValueError):
    """Raised for malformed experiment configurations or model input."""


class ResonanceWarning(RuntimeWarning):
    """Emitted when averaged phase factors sit within tolerance of unity."""


class GridResolutionError(UndefinedWindingError):
    """Raised when a sampled phase jumps too far between adjacent grid points."""
