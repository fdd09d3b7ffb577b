"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand sizes do not agree."""


class ParameterError(ValueError):
    """A numeric parameter lies outside its admissible range."""


class ConvergenceError(RuntimeError):
    """An inner solver stopped without meeting its tolerance."""


class SolutionReached(ArithmeticError):
    """Raised when a quantity is undefined because the iterate is already in S."""


class ConfigError(ValueError):
    """Invalid user configuration (CLI, config files, missing inputs)."""
