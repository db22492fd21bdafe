class ValidationError(ValueError):
    """Input failed a structural or numerical validity check."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class SolverError(RuntimeError):
    """A dense solve or a finite iterative method did not meet its contract."""


class NonUniqueStationaryError(SolverError):
    """The induced chain has more than one recurrent class."""


class BoundViolation(RuntimeError):
    """A theoretical bound was exceeded beyond the configured slack."""

    def __init__(self, name, k, measured, bound):
        super().__init__(f"{name} violated at k={k}: measured {measured!r} > bound {bound!r}")
        self.name = name
        self.k = k
        self.measured = measured
        self.bound = bound


class PlanOverflowError(OverflowError):
    """The batch size of a sampling plan is not representable."""

    def __init__(self, message, horizon):
        super().__init__(message)
        self.horizon = horizon
