"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class InvalidModeError(InvalidInputError):
    """A tensor mode index lies outside 1..N."""


class DegenerateInputError(InvalidInputError):
    """The input hits a degeneracy that the method's assumptions exclude."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge or produced non-finite values."""


class ConfigError(InvalidInputError):
    """A run configuration is internally inconsistent."""
