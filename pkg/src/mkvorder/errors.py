"""Exception hierarchy shared by every module."""

from __future__ import annotations


class MkvError(Exception):
    """Base class for all package errors."""


class DimensionError(MkvError, ValueError):
    pass


class DomainError(MkvError, ValueError):
    """Parameters outside a preset's documented domain."""


class LookupFailure(MkvError, KeyError):
    """Unknown preset or registry name."""

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class NotPSDError(MkvError, ValueError):
    pass


class OrderViolationError(MkvError, ValueError):
    """Matrix order required by a construction does not hold."""


class DivergenceError(MkvError, FloatingPointError):
    def __init__(self, message: str, particle: int, step: int):
        super().__init__(message)
        self.particle = particle
        self.step = step


class TooLargeError(MkvError, ValueError):
    pass


class GridError(MkvError, ValueError):
    pass


class RangeError(MkvError, ValueError):
    pass


class ContractError(MkvError, TypeError):
    """A functional was passed without the declarations a routine relies on."""


class ConfigError(MkvError, ValueError):
    pass


class HorizonError(MkvError, ArithmeticError):
    """Riccati solution blew up before reaching t = 0."""
