"""Exception types shared across the package."""


class MakinolabError(Exception):
    """Base class for all package errors."""


class ConfigError(MakinolabError):
    """Configuration file failed to parse or validate."""


class AdmissibilityError(MakinolabError):
    """Requested (d, gamma, s, kappa, mu) combination is rejected."""

    def __init__(self, verdict):
        self.verdict = verdict
        super().__init__(f"inadmissible configuration: {'; '.join(verdict.violations)}")


class FieldNotFiniteError(MakinolabError):
    """A field contains NaN or Inf samples."""


class NonZeroMeanError(MakinolabError):
    """Negative-order fractional derivative applied to a field with nonzero mean."""


class EigenSolveError(MakinolabError):
    """Eigenvalue routine failed to converge."""


class H0ViolatedError(MakinolabError):
    """Spectrum of the initial velocity gradient touches the negative real axis."""


class NewtonDivergedError(MakinolabError):
    """Flow inversion did not converge within the iteration cap."""


class DimensionError(MakinolabError):
    """Coupling case is not available in the requested space dimension."""


class NegativeDensityError(MakinolabError):
    """Density input below the negativity floor."""


class CflViolationError(MakinolabError):
    """Requested time step exceeds the advective CFL bound."""


class StiffnessError(MakinolabError):
    """Adaptive ODE step collapsed; trajectory treated as blown up."""


class InsufficientWindowError(MakinolabError):
    """Fit window holds too few usable samples."""


class DomainError(MakinolabError):
    """Inequality-test parameters outside their validity range."""
