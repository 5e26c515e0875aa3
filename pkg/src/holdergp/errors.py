"""Exception types raised across the package."""


class HolderGPError(Exception):
    """Base class for all package errors."""


class DomainError(HolderGPError, ValueError):
    """A time argument lies outside the model's domain."""


class ParameterError(HolderGPError, ValueError):
    """An argument violates an operation's precondition."""


class CapabilityError(HolderGPError):
    """The model or kernel lacks what the operation needs."""


class NumericalConsistencyError(HolderGPError, ArithmeticError):
    """A computed quantity is inconsistent beyond round-off."""


class InsufficientDataError(HolderGPError, ValueError):
    """Too few usable points to fit or estimate."""


class NotPositiveDefiniteError(HolderGPError, ArithmeticError):
    """Cholesky factorization failed even at the largest jitter."""


class EmbeddingError(HolderGPError, ArithmeticError):
    """Circulant embedding produced significantly negative eigenvalues."""
