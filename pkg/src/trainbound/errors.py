"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class NumericalError(ArithmeticError):
    """A numerical routine produced a non-finite value or failed to converge."""


class A2ViolationError(RuntimeError):
    """The boundary-continuity check on the entropy derivatives failed."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class BudgetExceededError(RuntimeError):
    """An exhaustive enumeration would exceed the configured state budget."""


class NegativeMutualInformationWarning(RuntimeWarning):
    """A mutual-information estimate came out negative beyond tolerance."""
