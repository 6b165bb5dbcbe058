"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where a law is defined."""


class ConvergenceError(RuntimeError):
    """A series or quadrature did not reach its tolerance.

    ``estimate`` holds the last value and ``error`` the last error estimate.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class RejectionBudgetError(RuntimeError):
    """A rejection sampler exhausted its proposal budget."""

    def __init__(self, message, acceptance_rate):
        super().__init__(message)
        self.acceptance_rate = acceptance_rate
