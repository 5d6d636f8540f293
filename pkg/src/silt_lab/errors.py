"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid walk or experiment configuration."""


class ParameterError(ValueError):
    """A numeric argument outside its admissible range."""


class DomainError(ValueError):
    """The requested quantity is undefined (e.g. a divergent integral)."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""
