"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the documented domain of an operation."""


class ConfigError(ValueError):
    """Experiment configuration failed validation.

    Carries every violation found, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NumericError(RuntimeError):
    """A numerical routine failed (eigensolver, singular resolvent, ...)."""


class NonConvergenceError(NumericError):
    """Fixed-point iteration exhausted its budget.

    Attributes
    ----------
    residual : float
        Residual at the last iterate.
    nu : float or None
        Imaginary part of the spectral point at which the solve failed,
        set by continuation drivers.
    """

    def __init__(self, message, residual, nu=None):
        super().__init__(message)
        self.residual = residual
        self.nu = nu


class NoiseFloorError(RuntimeError):
    """Rate fitting refused: the measured distances are noise-dominated."""
