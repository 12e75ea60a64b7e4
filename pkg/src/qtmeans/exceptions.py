"""Exception hierarchy shared by all modules."""


class QTError(Exception):
    """Base class for errors raised by qtmeans."""


class NonPositiveSymbol(QTError, ValueError):
    """A symbol expected to be strictly positive takes a non-positive value."""


class DomainError(QTError, ValueError):
    """The range of a symbol leaves the domain of a scalar function."""


class NotPositiveDefinite(QTError, ValueError):
    """A matrix expected to be self-adjoint positive definite is not."""


class NoConvergence(QTError, RuntimeError):
    """An iteration hit its iteration (or size) cap before meeting its tolerance."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class SupportOverflow(QTError):
    """A finite quasi-Toeplitz result violates the bandwidth/support rule."""
