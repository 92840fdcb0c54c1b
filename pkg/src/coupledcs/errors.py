"""Exception types shared across the package."""


class QuadratureError(ArithmeticError):
    """Raised when a quadrature does not reach the requested tolerance.

    Carries the value and the estimated error so callers can decide
    whether to retry or surface the failure.
    """

    def __init__(self, message, value=None, error_estimate=None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class ConvergenceError(ArithmeticError):
    """Raised when a fixed-point iteration exhausts its iteration budget.

    Carries the residual at the last iterate.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
