"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Malformed input: dimension mismatch, invalid parameters, bad scenario."""


class StepFailure(RuntimeError):
    """The implicit step solve did not converge.

    Attributes
    ----------
    residual : float
        Last step residual reached by the solver.
    iterations : int
        Number of iterations spent before giving up.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class IntegrationAborted(RuntimeError):
    """Raised by :func:`metriplectic.integrate.integrate` on step failure.

    Carries the partial trajectory computed before the failing step.
    """

    def __init__(self, message, trajectory, cause):
        super().__init__(message)
        self.trajectory = trajectory
        self.cause = cause
