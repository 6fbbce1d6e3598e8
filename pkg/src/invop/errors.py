"""Exception hierarchy shared across the package."""


class InvopError(Exception):
    """Base class for all errors raised by this package."""


class NonAdmissibleCoefficient(InvopError):
    """Coefficient violates the positivity lower bound of the forward problem."""


class SingularSystem(InvopError):
    """Assembled Galerkin system is not symmetric positive definite."""


class DimensionMismatch(InvopError):
    """Array shapes or mesh sizes are inconsistent."""


class OutOfRange(InvopError):
    """Argument outside the admissible interval."""


class NonAdmissiblePerturbation(InvopError):
    """Perturbation amplitude exceeds the admissibility margin of the center."""


class DependentImages(InvopError):
    """Training images are (numerically) linearly dependent."""


class RangeViolation(InvopError):
    """Rescaled values left the open interval (0, 1) required by the prior."""


class IllConditionedFit(InvopError):
    """Least-squares system too ill-conditioned even after one reseed."""


class EmptyProbeSet(InvopError):
    """A probe-based estimate was requested with no probes."""


class WidthTooLarge(InvopError):
    """Mollification width does not fit the unit interval."""


class PropertyViolation(InvopError):
    """A mollification property check failed."""

    def __init__(self, message, xi=None):
        super().__init__(message)
        self.xi = xi


class DegenerateScale(InvopError):
    """Both noise level and surrogate accuracy are zero."""


class Stalled(InvopError):
    """Line search failed to make progress."""


class DegenerateFit(InvopError):
    """Slope fit impossible: all abscissae coincide."""


class ConfigInvalid(InvopError):
    """Study or CLI configuration failed validation."""
