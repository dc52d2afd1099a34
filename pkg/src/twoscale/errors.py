"""Exception types shared across the package."""


class TwoscaleError(Exception):
    """Base class for all errors raised by this package."""


class ModelValidationError(TwoscaleError, ValueError):
    """A model or model descriptor is structurally invalid."""


class FastChainError(TwoscaleError, RuntimeError):
    """Kernel assembly, stationary solve, or deviation matrix failed."""


class MeanFieldError(TwoscaleError, RuntimeError):
    """ODE integration or fixed-point search failed."""


class RefinementError(TwoscaleError, RuntimeError):
    """Refinement terms are undefined or a matrix equation has no solution."""


class SimulationError(TwoscaleError, RuntimeError):
    """Stochastic simulation hit an invalid model state or budget."""


class OracleError(TwoscaleError, RuntimeError):
    """Exact full-chain analysis failed or its guards were exceeded."""


class ConfigError(TwoscaleError, ValueError):
    """Command-line or experiment configuration is invalid."""
