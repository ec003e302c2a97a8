"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point lies outside the feasible set or the geometry's domain."""


class ConvergenceError(RuntimeError):
    """An iterative routine failed to reach its tolerance.

    Carries the residual achieved and the iteration count when available.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class CertificateError(RuntimeError):
    """No optimality certificate could be constructed for an instance."""


class ConfigError(ValueError):
    """An experiment configuration is malformed."""
