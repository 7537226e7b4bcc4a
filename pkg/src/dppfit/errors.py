"""Exception and warning types shared across the package."""


class DppfitError(Exception):
    """Base class for all package-specific errors."""


class DomainError(DppfitError, ValueError):
    """A parameter is outside its mathematical domain (e.g. alpha <= 0)."""


class ExistenceViolated(DppfitError):
    """The kernel's spectral density exceeds 1 somewhere: no DPP exists."""

    def __init__(self, sup_density, message=None):
        self.sup_density = sup_density
        super().__init__(message or f"spectral density peaks at {sup_density:.6g} > 1")


class TruncationFailure(DppfitError):
    """The spectral truncation cap was hit before reaching the tail tolerance."""


class SamplerStall(DppfitError):
    """Rejection sampling exceeded the proposal budget for a single point."""


class EmptyErosion(DppfitError, ValueError):
    """Erosion radius is at least half the shortest window side."""


class DegenerateConfiguration(DppfitError):
    """Correlation matrix is singular; log-derivatives are undefined."""


class EstimationError(DppfitError):
    """Base class for failures of the composite likelihood fit."""


class NoPairs(EstimationError):
    """No ordered pair of points lies within the tuning radius."""


class NoTuples(EstimationError):
    """No ordered p-tuple lies in the weight support."""


class DegenerateLikelihood(EstimationError):
    """Every point of the search grid evaluates to a degenerate likelihood."""


class NormalizerDegenerate(EstimationError):
    """The composite likelihood normalizer came out non-positive."""


class InfoNotPD(DppfitError):
    """The limiting Hessian block is not positive definite at this parameter."""


class PatternFormatError(DppfitError, ValueError):
    """A point-pattern file failed to parse or validate."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(DppfitError, ValueError):
    """An experiment configuration is malformed."""


class DegeneracyWarning(UserWarning):
    """A determinant hit the numeric floor (near-coincident points)."""


class EmptyPatternWarning(UserWarning):
    """An operation ran on a pattern with no points."""


class NormalizerImprecise(UserWarning):
    """QMC normalizer missed its error target within the sample budget."""


class Sigma22Imprecise(UserWarning):
    """QMC score-variance block missed its error target within budget."""


class PSDRepairWarning(UserWarning):
    """Negative eigenvalues were clipped when symmetrizing a covariance block."""


class ICUnreliable(UserWarning):
    """Information criterion computed from a boundary or degenerate fit."""
