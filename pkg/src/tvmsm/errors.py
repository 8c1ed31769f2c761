"""Exception types raised across the package."""


class TvmsmError(Exception):
    """Base class for all package-specific errors."""


class PanelValidationError(TvmsmError, ValueError):
    """A candidate panel violates a structural invariant."""


class ConfigError(TvmsmError, ValueError):
    """Invalid analysis or simulation configuration."""


class FitError(TvmsmError, RuntimeError):
    """A model fit could not be completed."""


class SeparationError(FitError):
    """Logistic MLE does not exist or the solver diverged (quasi-separation)."""


class RankDeficiencyError(FitError):
    """Design matrix is rank deficient."""


class NoContrastError(FitError):
    """The outcome-model regressor takes a single value among usable units."""


class InfeasibleSubsetError(FitError):
    """A unit subset is too small, or has no regressor contrast, to support a fit."""


class BootstrapUnstableError(TvmsmError):
    """Too many bootstrap resamples failed to produce an estimate."""
