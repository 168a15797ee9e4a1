"""Exception types raised by the design and simulation routines."""


class CoopestError(Exception):
    """Base class for all package errors."""


class IsolatedAgent(CoopestError):
    """An agent has no in-neighbours and therefore receives no measurements."""


class DimensionMismatch(CoopestError, ValueError):
    pass


class Infeasible(CoopestError):
    """The LMI feasibility problem has no solution (or none was certified).

    Attributes
    ----------
    status : str
        Termination status reported by the solver, or ``"verification_failed"``
        when the solver returned a point that does not satisfy the margins.
    """

    def __init__(self, status, message=None):
        self.status = status
        super().__init__(message or f"LMI infeasible (solver status: {status})")


class NumericalFailure(CoopestError):
    """The SDP solver stopped without a usable answer."""

    def __init__(self, status, message=None):
        self.status = status
        super().__init__(message or f"SDP solver failed (status: {status})")


class InfeasibleAtUpperBound(Infeasible):
    pass


class SingularP(CoopestError):
    pass


class NoSolution(CoopestError):
    """The Francis regulator equations are not solvable."""


class NoStabilizingSolution(CoopestError):
    pass


class NotPositiveDefinite(CoopestError):
    pass


class NonFiniteState(CoopestError):
    """Simulation state diverged (non-finite or above 1e12 in magnitude)."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"state diverged at t={t:g}")


class ScenarioError(CoopestError, ValueError):
    """Malformed scenario file. ``field`` names the offending location."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
