"""Exception types shared across the package."""


class AnalogLPError(Exception):
    """Base class for all errors raised by :mod:`analoglp`."""


class StructuralError(AnalogLPError):
    """The problem or circuit violates a structural requirement.

    Raised for zero rows/columns, rows with no conductance, singular
    networks and similar defects that no amount of iteration can fix.
    """


class InfeasibleError(AnalogLPError):
    """A constraint system has no solution."""


class AssumptionError(AnalogLPError):
    """A precondition of the circuit equivalence result does not hold.

    ``which`` names the violated assumption (``"primal"`` or ``"dual"``).
    """

    def __init__(self, message, which=None):
        super().__init__(message)
        self.which = which


class ConvergenceError(AnalogLPError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message, residuals=None, trace=None):
        super().__init__(message)
        self.residuals = residuals
        self.trace = trace


class SimulationError(AnalogLPError):
    """Transient integration produced a non-finite state."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
