"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A parameter or configuration violates a documented precondition.

    May carry a list of messages when several violations are collected
    during config validation.
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations) if violations is not None else [str(message)]


class InfeasibleError(RuntimeError):
    """A requested operating point cannot satisfy its constraints."""


class ChainBuildError(RuntimeError):
    """A transition matrix failed structural validation (row-sum defect)."""


class StationarySolveError(RuntimeError):
    """The stationary-distribution solver could not meet its residual target."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericalInstabilityError(ArithmeticError):
    """A closed-form evaluation left the representable/valid range."""
