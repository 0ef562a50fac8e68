"""Exception types raised across the package."""


class InexoptError(Exception):
    """Base class for all package errors."""


class InvalidArgument(InexoptError, ValueError):
    pass


class InvalidConfig(InexoptError, ValueError):
    """Solver parameters outside the range where the descent lemmas hold."""


class NotSummable(InexoptError, ValueError):
    """A tail sum of squared noise magnitudes diverges."""


class ModelViolation(InexoptError):
    """A structural assumption on the problem failed at runtime."""


class NumericFailure(InexoptError, ArithmeticError):
    """Non-finite value encountered.

    ``trace`` carries the records produced before the failure, if any.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
