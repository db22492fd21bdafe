"""Step-size schedules for policy mirror descent."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from .exceptions import ValidationError

# Step sizes are capped here; at this magnitude every mirror step is already the
# greedy (policy-iteration) step to double precision.
ETA_MAX = 1e300

KINDS = ("constant", "geometric", "theta_ratio")


@dataclass(frozen=True)
class StepSchedule:
    """``constant``: ``eta_k = eta``.  ``geometric``: ``eta_k = eta * ratio**k``
    (``ratio`` defaults to ``1/gamma``).  ``theta_ratio``:
    ``eta_k = eta * (theta/(theta-1))**k``.

    ``eta=None`` asks the runner to pick a default once ``D*_0`` is known.
    """

    kind: str = "geometric"
    eta: Optional[float] = None
    ratio: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown schedule {self.kind!r}; use one of {KINDS}")
        if self.eta is not None and not self.eta > 0:
            raise ValidationError("step size must be positive")
        if self.ratio is not None and not self.ratio > 1:
            raise ValidationError("geometric ratio must exceed 1")

    @classmethod
    def constant(cls, eta=None):
        return cls("constant", eta)

    @classmethod
    def geometric(cls, eta0=None, ratio=None):
        return cls("geometric", eta0, ratio)

    @classmethod
    def theta_ratio(cls, eta0=None):
        return cls("theta_ratio", eta0)

    @property
    def increasing(self):
        return self.kind != "constant"

    def with_eta(self, eta):
        return replace(self, eta=eta)


def as_schedule(schedule):
    if isinstance(schedule, StepSchedule):
        return schedule
    if isinstance(schedule, str):
        return StepSchedule(schedule)
    raise ValidationError(f"cannot interpret {schedule!r} as a step schedule")


def growth_factor(schedule, gamma=None, theta_rho=None):
    if schedule.kind == "constant":
        return 1.0
    if schedule.kind == "geometric":
        if schedule.ratio is not None:
            return schedule.ratio
        if not gamma:
            raise ValidationError("geometric ratio 1/gamma is undefined for gamma = 0")
        return 1.0 / gamma
    if theta_rho is None or not math.isfinite(theta_rho) or not theta_rho > 1:
        raise ValidationError("theta_ratio schedule needs a finite theta_rho > 1")
    return theta_rho / (theta_rho - 1.0)


def step_eta(schedule, k, gamma=None, theta_rho=None):
    """Step size at iteration ``k``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if schedule.eta is None:
        raise ValidationError("schedule has no base step size; resolve defaults first")
    factor = growth_factor(schedule, gamma, theta_rho)
    if factor == 1.0:
        return schedule.eta
    log_eta = math.log(schedule.eta) + k * math.log(factor)
    if log_eta >= math.log(ETA_MAX):
        return ETA_MAX
    return schedule.eta * factor**k


def meets_linear_condition(schedule, gamma, theta_rho):
    """Whether ``eta_{k+1} >= theta/(theta-1) * eta_k`` holds for every ``k``."""
    if schedule.kind == "constant" or theta_rho is None or not math.isfinite(theta_rho):
        return False
    if theta_rho <= 1:
        return False
    need = theta_rho / (theta_rho - 1.0)
    # 1/gamma >= need always holds mathematically; allow round-off in theta_rho
    return growth_factor(schedule, gamma, theta_rho) >= need * (1 - 1e-12)
