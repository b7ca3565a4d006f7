"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`ZRLabError`;
the CLI maps the subclasses onto exit codes.
"""


class ZRLabError(Exception):
    """Base class for all package errors."""


class InvalidRateError(ZRLabError, ValueError):
    """Rate table violates c(0) = 0 or c(n) > 0 for n >= 1."""


class EmptyInputError(ZRLabError, ValueError):
    pass


class DomainError(ZRLabError, ValueError):
    """Argument outside the mathematical domain of the operation."""


class ShapeError(ZRLabError, ValueError):
    pass


class InsufficientTabulationError(ZRLabError, ValueError):
    """Rate table is shorter than the particle number requires."""


class ExtendTableError(ZRLabError, ValueError):
    """A certified truncation is impossible within the tabulated rates."""


class SectorTooLargeError(ZRLabError, MemoryError):
    def __init__(self, count, cap):
        super().__init__(f"sector has {count} configurations, cap is {cap}")
        self.count = count
        self.cap = cap


class TooLargeError(ZRLabError, MemoryError):
    pass


class ConvergenceError(ZRLabError, RuntimeError):
    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class DegenerateError(ZRLabError, ValueError):
    pass


class DisconnectedSupportError(ZRLabError, ValueError):
    pass


class InsufficientDataError(ZRLabError, ValueError):
    pass


class ConfigError(ZRLabError, ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""
