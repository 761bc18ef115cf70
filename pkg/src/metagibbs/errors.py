"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite value where a finite one was required."""


class InfiniteDivergence(ArithmeticError):
    """A KL divergence is infinite because of a support mismatch.

    Raised instead of returning ``inf`` so that bound arithmetic fails loudly.
    """


class OptimizationFailure(RuntimeError):
    """An iterative fit diverged or ended worse than its initializer."""


class FitUnavailable(ValueError):
    """Too few usable points to fit a rate."""


class UnsupportedEnvironment(TypeError):
    """The requested operation is not defined for this environment kind."""


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""
