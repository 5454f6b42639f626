"""Exception types shared across the package."""


class DelayWarpError(Exception):
    """Base class for all delaywarp errors."""


class InvalidDelayError(DelayWarpError, ValueError):
    """Delay parameters violate a structural constraint (e.g. tau(t) <= 0)."""


class HypothesisError(DelayWarpError):
    """An expansion hypothesis required by the requested operation fails."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ResonanceError(DelayWarpError):
    """omega*tau0 too close to a multiple of pi: expansion denominator vanishes."""


class TransformDomainError(DelayWarpError, ValueError):
    """Time-transformation evaluated outside its domain."""


class RootFindingError(DelayWarpError):
    """Bracketed solve for g_inverse failed to converge or to bracket."""


class MonotonicityError(DelayWarpError):
    """A function required to be strictly increasing is not."""


class SeedFitError(DelayWarpError):
    """Constrained least-squares seed fit failed (ill-conditioned constraints)."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class SimulationError(DelayWarpError):
    """Integration failed (step too large, divergence, ...)."""

    def __init__(self, message, blow_up_time=None):
        super().__init__(message)
        self.blow_up_time = blow_up_time
