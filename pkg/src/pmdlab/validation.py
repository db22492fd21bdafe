"""Input validation helpers shared by the functional API and the estimators."""

from __future__ import annotations

import numpy as np

from ._config import get_tolerances
from .exceptions import ValidationError


def check_mdp(mdp):
    """Return ``mdp`` if it passes :func:`pmdlab.instances.validate`, else raise."""
    from .mdp import Dmdp
    from .instances import validate

    if not isinstance(mdp, Dmdp):
        raise ValidationError(f"expected a Dmdp, got {type(mdp).__name__}")
    violations = validate(mdp)
    if violations:
        raise ValidationError("invalid MDP: " + "; ".join(violations[:5]), violations)
    return mdp


def check_distribution(d, num_states, name="distribution"):
    """Validate a state distribution and return it as a float array."""
    arr = np.asarray(d, dtype=float)
    if arr.shape != (num_states,):
        raise ValidationError(f"{name} must have shape ({num_states},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        raise ValidationError(f"{name} has negative entries")
    if abs(arr.sum() - 1.0) > get_tolerances().distribution_sum:
        raise ValidationError(f"{name} sums to {arr.sum()!r}, not 1")
    return arr


def check_policy(pi, num_states, num_actions, name="policy"):
    """Validate a row-stochastic policy table and return it as a float array."""
    arr = np.asarray(pi, dtype=float)
    if arr.shape != (num_states, num_actions):
        raise ValidationError(
            f"{name} must have shape ({num_states}, {num_actions}), got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValidationError(f"{name} has negative or non-finite entries")
    err = np.abs(arr.sum(axis=1) - 1.0)
    if np.any(err > get_tolerances().policy_row_sum):
        s = int(np.argmax(err))
        raise ValidationError(f"{name} row {s} sums to {arr[s].sum()!r}")
    return arr


def is_interior(pi):
    """True iff every entry of the policy (or simplex point) is strictly positive."""
    return bool(np.min(pi) > 0)


def uniform_distribution(n):
    return np.full(n, 1.0 / n)


def uniform_policy(num_states, num_actions):
    return np.full((num_states, num_actions), 1.0 / num_actions)
