"""Exception types shared across the package."""


class DomainError(ValueError):
    """A value lies outside the domain where an operation is defined."""


class SolverError(RuntimeError):
    """An iterative solver did not converge.

    ``residual`` carries the last residual norm observed, when known.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateSteadyStateError(SolverError):
    """The steady-state iteration landed on a zero or sign-changing solution."""


class BlowUpError(RuntimeError):
    """A time integration produced non-finite values."""

    def __init__(self, message, time):
        super().__init__(message)
        self.time = time
