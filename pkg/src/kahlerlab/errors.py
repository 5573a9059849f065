"""Exception types raised by the lab."""


class KahlerLabError(Exception):
    """Base class for all lab-specific errors."""


class InvalidDomainError(KahlerLabError, ValueError):
    """Grid domain is degenerate (bad side length, resolution, or dimension)."""


class InvalidParameterError(KahlerLabError, ValueError):
    """A numeric parameter is outside its admissible range."""


class PositivityError(KahlerLabError, ValueError):
    """A metric lost positive definiteness.

    Carries the flat index of the worst node and the offending eigenvalue.
    """

    def __init__(self, message, node=None, value=None):
        super().__init__(message)
        self.node = node
        self.value = value


class DivisionSingularityError(KahlerLabError, ZeroDivisionError):
    """A reference density vanishes where a pointwise ratio is required."""


class AssemblyError(KahlerLabError, ValueError):
    """Operator assembly refused (metric not positive at some node)."""


class SolverError(KahlerLabError, RuntimeError):
    """An eigensolver or linear solve did not reach the requested residual."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class TruncationError(KahlerLabError, ValueError):
    """Spectral truncation cannot certify the requested evaluation.

    Carries ``t_min``, the smallest time at which the available spectrum
    certifies the tail below tolerance.
    """

    def __init__(self, message, t_min=None):
        super().__init__(message)
        self.t_min = t_min


class QuadratureBudgetError(KahlerLabError, RuntimeError):
    """Adaptive quadrature could not certify the requested tolerance."""


class SupportError(KahlerLabError, ValueError):
    """A test function violates a support / cutoff precondition."""


class PreconditionError(KahlerLabError, ValueError):
    """A differential inequality precondition fails.

    Carries the flat index of the worst node and the residual there.
    """

    def __init__(self, message, node=None, value=None):
        super().__init__(message)
        self.node = node
        self.value = value
