"""Exception types raised across the package."""


class CapExceededError(ValueError):
    """A size, depth, or budget limit would be exceeded."""


class BudgetExceededError(CapExceededError):
    """The planned segment count is larger than the allowed budget.

    The computed count is kept on ``segments`` so callers can raise the
    budget and retry.
    """

    def __init__(self, message, segments):
        super().__init__(message)
        self.segments = segments


class ContractError(ValueError):
    """An operation was called with inputs violating its preconditions."""


class ConvergenceError(RuntimeError):
    """An iterative routine failed to reach the requested accuracy."""
