"""Exception types shared across the package."""


class NotPositiveDefiniteError(ValueError):
    """A matrix required to be positive definite is not.

    Carries the zero-based index of the failing pivot so callers can report
    which leading minor broke the factorization.
    """

    def __init__(self, pivot, message=None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (pivot {pivot})")


class SingularBackgroundError(ValueError):
    """The blended background matrix is singular (beta=1 with rank-deficient
    negative moments). Use beta < 1 or an explicit ridge."""


class DivergenceError(RuntimeError):
    """An iterative solver produced non-finite values or lost positive
    definiteness; usually means the step size is too large."""


class StreamError(RuntimeError):
    """A streaming run failed partway; carries the failing sample index."""

    def __init__(self, index, original):
        self.index = index
        self.original = original
        super().__init__(f"stream failed at sample {index}: {original}")
