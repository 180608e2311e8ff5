"""Exception hierarchy shared by every module of the package."""


class SvirError(Exception):
    """Base class for all errors raised by svir_control."""


class InvalidInputError(SvirError, ValueError):
    """An argument violates a documented precondition."""


class DomainError(SvirError, ValueError):
    """A formula is evaluated where one of its denominators vanishes."""


class NumericalError(SvirError, ArithmeticError):
    """A numerical routine failed (root finding, non-finite values...)."""


class InstabilityError(NumericalError):
    """Integration produced a negative or non-finite state component."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NonConvergenceError(NumericalError):
    """The forward-backward sweep hit its iteration cap.

    Carries the partially converged solution so callers can still report it.
    """

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution
