"""Global numerical tolerances, overridable in the style of ``sklearn.config_context``."""

from __future__ import annotations

import contextlib
import dataclasses
import threading


@dataclasses.dataclass(frozen=True)
class Tolerances:
    row_sum: float = 1e-9          # transition rows / induced dynamics
    policy_row_sum: float = 1e-12
    distribution_sum: float = 1e-10
    linear_residual: float = 1e-10
    value_range: float = 1e-9
    descent: float = 1e-12         # exact PMD monotonicity and Q-descent
    bound_slack: float = 1e-9      # additive slack on every theoretical bound
    tie: float = 1e-10             # argmin ties in policy improvement


_local = threading.local()
_default = Tolerances()


def get_tolerances() -> Tolerances:
    return getattr(_local, "tol", _default)


def set_tolerances(**overrides) -> Tolerances:
    """Replace tolerances for the current thread; returns the previous set."""
    old = get_tolerances()
    _local.tol = dataclasses.replace(old, **overrides)
    return old


@contextlib.contextmanager
def tolerance_context(**overrides):
    old = set_tolerances(**overrides)
    try:
        yield get_tolerances()
    finally:
        _local.tol = old
