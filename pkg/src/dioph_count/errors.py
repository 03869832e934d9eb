"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain where an operation is defined."""


class OutOfDomain(DomainError):
    """A matrix is outside the principal-logarithm domain."""


class ResourceGuardError(RuntimeError):
    """A configured resource bound (level, entry bound, time) was exceeded."""


class InvariantViolation(AssertionError):
    """An internal invariant failed; always a bug or corrupted input."""


class NotFound(LookupError):
    """No point was found below the height cap."""

    def __init__(self, h_cap, message=None):
        self.h_cap = h_cap
        super().__init__(message or f"no point found with height <= {h_cap}")
