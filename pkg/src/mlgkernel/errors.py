"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    pass


class SingularMatrixError(ArithmeticError):
    """Raised when a matrix that must be positive definite fails to factor.

    ``pivot`` is the 0-based index of the first non-positive pivot reported
    by the Cholesky factorization.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class BaseKernelError(ValueError):
    """A base kernel produced a Gram matrix that is not PSD within tolerance."""


class BudgetExceededError(RuntimeError):
    def __init__(self, message, level=None, evaluations=None):
        super().__init__(message)
        self.level = level
        self.evaluations = evaluations


class ConvergenceError(RuntimeError):
    def __init__(self, message, kkt_gap=None):
        super().__init__(message)
        self.kkt_gap = kkt_gap


class StratificationError(ValueError):
    pass


class DatasetFormatError(ValueError):
    """Malformed dataset file; message carries file name and line number."""
