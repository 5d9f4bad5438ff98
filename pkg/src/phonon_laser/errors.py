"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class InvariantViolation(RuntimeError):
    """A density-matrix invariant failed during a run."""

    def __init__(self, invariant, time, value):
        self.invariant = invariant
        self.time = time
        self.value = value
        super().__init__(f"invariant '{invariant}' violated at t={time:.6g} ps (value {value:.3e})")


class SolverError(RuntimeError):
    """The steady-state solve did not reach the residual tolerance."""

    def __init__(self, message, smallest_singular_value=None):
        self.smallest_singular_value = smallest_singular_value
        super().__init__(message)
