"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid domain, noise or solver configuration."""


class DomainError(ValueError):
    """A point or parameter lies outside the admissible region."""


class ConditioningError(RuntimeError):
    """A matrix is numerically singular or too ill-conditioned to proceed."""


class SolverError(RuntimeError):
    """The linear solver failed to converge; carries a residual report."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
