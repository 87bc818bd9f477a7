"""Exception types raised across the package."""


class BatchMNError(Exception):
    """Base class for all package errors."""


class NonIntegerDimension(BatchMNError, ValueError):
    pass


class InvalidXi(BatchMNError, ValueError):
    pass


class DimensionMismatch(BatchMNError, ValueError):
    pass


class BatchMismatch(BatchMNError, ValueError):
    """Batch size does not divide the number of rows."""


class DomainError(BatchMNError, ValueError):
    """A closed-form expression was evaluated outside its domain."""


class SingularGram(BatchMNError, ArithmeticError):
    """A Gram matrix is not numerically positive definite."""


class DegenerateProjection(BatchMNError, ArithmeticError):
    pass
