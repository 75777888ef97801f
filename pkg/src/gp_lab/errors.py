"""Exception hierarchy shared by all modules."""


class GpLabError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(GpLabError):
    """A physical or numerical parameter violates its stated range."""


class GeometryMismatchError(GpLabError):
    """An operation was asked to combine incompatible geometries."""


class UnsupportedOrderError(GpLabError):
    """Derivative order outside the supported range."""


class TrivialSolutionError(GpLabError):
    """Newton iteration collapsed onto the zero solution."""


class NoConvergenceError(GpLabError):
    """An iterative solver ran out of iterations.

    Carries the residual history so callers can diagnose stagnation.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class BranchRangeError(GpLabError):
    """A frequency outside the continued branch interval was requested."""


class SpectralWindowError(GpLabError):
    """An eigenvalue was not found inside its expected window."""


class DegeneratePairingError(GpLabError):
    """The neutral-mode pairing matrix is numerically singular."""


class IllConditionedProjectionError(GpLabError):
    """The discrete projection normalizer (branch slope) is too close to zero."""


class BelowThresholdError(GpLabError):
    """A resonance energy fell below the continuum edge."""


class OutOfRegimeError(GpLabError):
    """Initial data is outside the small-amplitude regime of the run."""


class ConfigError(GpLabError):
    """Run configuration failed schema validation."""
