"""
Error hierarchy.

ConfigError and its subclasses mean the request itself is wrong (exit code 1),
NumericalError means the numbers went bad while running (exit code 2).
I/O failures surface as the builtin OSError (exit code 3).
"""
from typing import Optional


class FreeSTMError(Exception):
    pass


class ConfigError(FreeSTMError, ValueError):
    """Invalid configuration or violated precondition"""
    pass


class StabilityHypothesisError(ConfigError):
    """2L' <= K_hat: the mean-square stability theorem gives no bound"""
    pass


class NumericalError(FreeSTMError, ArithmeticError):
    pass


class EigensolverError(NumericalError):
    pass


class DomainError(NumericalError, ValueError):
    """A scalar coefficient is undefined somewhere on the spectrum"""
    pass


class ImplicitSolveError(NumericalError):
    pass


class SimulationError(NumericalError):
    def __init__(self, message: str, *, step: Optional[int] = None):
        super().__init__(message)
        self.step = step
