"""Exception types shared across the package."""


class SurfOptError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(SurfOptError, ValueError):
    pass


class InfeasibleSpecError(SurfOptError, ValueError):
    """Gap bounds admit no (strictly) feasible surface arrangement."""


class InvalidParameterError(SurfOptError, ValueError):
    pass


class InvalidDistributionError(SurfOptError, ValueError):
    pass


class InvalidLabelError(SurfOptError, ValueError):
    pass


class NonConvergenceError(SurfOptError):
    """The interior point loop hit ``max_outer`` without meeting the tolerance.

    ``solution`` holds the last iterate (``converged`` is False).
    """

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class StaleSolutionError(SurfOptError):
    """Backward pass requested on a solution that did not converge."""


class OracleFailureError(SurfOptError):
    pass


class BatchFailureError(SurfOptError):
    """Every column of a batch failed to converge."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class InvalidSpecError(SurfOptError, ValueError):
    """A synthetic fixture spec that cannot produce ordered, in-image surfaces."""
