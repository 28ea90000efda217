# verifier/exceptions.py
"""
Errors raised by the numerical modules and the scenario runner.

Inequality violations are never raised: a check that fails returns a verdict
with a negative margin and its witnesses. The classes below are reserved for
invalid input and numerical breakdown.
"""


class VerificationError(Exception):
    """Base class for everything the verifier raises on purpose."""


class LeavesChart(VerificationError):
    def __init__(self, point, t=None):
        self.point = point
        self.t = t
        where = f" at t={t:.6g}" if t is not None else ""
        super().__init__(f"geodesic left the coordinate domain{where}: {point}")


class ConjugatePoint(VerificationError):
    def __init__(self, t):
        self.t = t
        super().__init__(f"det A_t vanished near t={t:.6g}")


class NotAbsolutelyContinuous(VerificationError):
    pass


class SizeExceeded(VerificationError):
    pass


class NonMapPlan(VerificationError):
    pass


class InfinityMismatch(VerificationError):
    """Distortion coefficient is +inf while the other side stays finite."""

    tag = "InfinityMismatch"


class DegenerateWarp(VerificationError):
    pass


class ConditionViolated(VerificationError):
    def __init__(self, condition, where, value):
        self.condition = condition
        self.where = where
        self.value = value
        super().__init__(
            f"condition ({condition}) violated at {where}: residual {value:.3e}"
        )


class NegativeDensity(VerificationError):
    pass


class ScenarioParseError(VerificationError):
    pass


class CheckFailure(VerificationError):
    pass


class NumericalAbort(VerificationError):
    pass


# Raised inside a check means the run could not be completed numerically.
NUMERICAL_ERRORS = (
    LeavesChart,
    ConjugatePoint,
    NotAbsolutelyContinuous,
    SizeExceeded,
    NonMapPlan,
    DegenerateWarp,
    NegativeDensity,
    NumericalAbort,
)
