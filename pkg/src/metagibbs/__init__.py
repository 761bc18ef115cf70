"""Meta-learning priors for Gibbs posteriors: simulations, fits and bounds."""

from . import bernstein_lab, bounds, divergences, environments, experiments, meta_level, numerics, within_task
from .errors import (
    ConfigError,
    DomainError,
    FitUnavailable,
    InfiniteDivergence,
    NumericError,
    OptimizationFailure,
    UnsupportedEnvironment,
)

__version__ = "0.1.0"
