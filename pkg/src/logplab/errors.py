"""Exception types raised by logplab."""


class LogpError(Exception):
    """Base class for all library errors."""


class DomainError(LogpError, ValueError):
    """An argument lies outside the domain of a function or operation."""


class QuadratureError(LogpError, RuntimeError):
    """A quadrature could not reach the requested tolerance.

    ``estimate`` holds the best value found and ``error`` the achieved
    error estimate.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class ConvergenceError(LogpError, RuntimeError):
    """An iterative solver stopped before meeting its tolerance.

    ``best`` carries the best iterate (solver specific).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NonconvexError(LogpError, ValueError):
    """The Dirichlet functional is not convex for the given assembly."""
