"""Exact tabular quantities of a discounted MDP under the regret (minimization) convention.

Every function here is a pure function of its inputs.  Policies are ``(S, A)``
row-stochastic arrays and state distributions are ``(S,)`` arrays; see
:mod:`pmdlab.validation` for the checks applied at the public boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._config import get_tolerances
from .exceptions import SolverError, ValidationError
from .validation import check_distribution, check_policy


@dataclass(frozen=True, eq=False)
class Dmdp:
    """Finite discounted MDP.

    Parameters
    ----------
    transition : array of shape (S, A, S)
        ``transition[s, a, s']`` is the probability of moving to ``s'``.
    reward : array of shape (S, A)
        Per-step regret in ``[0, 1]``; the objective is minimized.
    gamma : float
        Discount factor in ``[0, 1)``.

    Only shapes are enforced on construction so that invalid files can still be
    loaded and reported on; use :func:`pmdlab.validation.check_mdp` before solving.
    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        R = np.array(self.reward, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValidationError(f"transition must have shape (S, A, S), got {P.shape}")
        if R.shape != P.shape[:2]:
            raise ValidationError(f"reward must have shape {P.shape[:2]}, got {R.shape}")
        if P.shape[0] < 1 or P.shape[1] < 1:
            raise ValidationError("need at least one state and one action")
        P.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def num_states(self):
        return self.transition.shape[0]

    @property
    def num_actions(self):
        return self.transition.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Dmdp):
            return NotImplemented
        return (
            self.gamma == other.gamma
            and np.array_equal(self.transition, other.transition)
            and np.array_equal(self.reward, other.reward)
        )

    __hash__ = None


def _checked(mdp, pi):
    return check_policy(pi, mdp.num_states, mdp.num_actions)


def _induced(mdp, pi):
    P_pi = np.einsum("sa,sat->st", pi, mdp.transition)
    r_pi = np.einsum("sa,sa->s", pi, mdp.reward)
    return P_pi, r_pi


def _solve(A, b, what):
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"{what}: singular system") from exc
    resid = np.max(np.abs(A @ x - b))
    # residual tolerance scales with the magnitude of the solution
    scale = max(1.0, float(np.max(np.abs(x))))
    if not np.isfinite(resid) or resid > get_tolerances().linear_residual * scale:
        raise SolverError(f"{what}: residual {resid:.3e} exceeds tolerance")
    return x


def induced_dynamics(mdp, pi):
    """State-to-state transition matrix and expected one-step regret under ``pi``."""
    pi = _checked(mdp, pi)
    P_pi, r_pi = _induced(mdp, pi)
    if np.any(np.abs(P_pi.sum(axis=1) - 1.0) > get_tolerances().row_sum):
        raise ValidationError("induced dynamics are not row-stochastic")
    return P_pi, r_pi


def _value(mdp, pi):
    P_pi, r_pi = _induced(mdp, pi)
    A = np.eye(mdp.num_states) - mdp.gamma * P_pi
    return _solve(A, r_pi, "value_function")


def value_function(mdp, pi):
    """Solve ``(I - gamma P(pi)) V = r(pi)`` by dense LU."""
    return _value(mdp, _checked(mdp, pi))


def value_rho(mdp, pi, rho):
    """``rho^T (I - gamma P(pi))^{-1} r(pi)`` for any real table ``pi``.

    No simplex check is applied: this is the analytic extension whose gradient
    :func:`policy_gradient` returns, and finite-difference probes leave the simplex.
    """
    pi = np.asarray(pi, dtype=float)
    return float(np.dot(rho, _value(mdp, pi)))


def _q(mdp, v):
    return mdp.reward + mdp.gamma * mdp.transition @ v


def q_function(mdp, pi, v=None):
    """``Q[s, a] = R[s, a] + gamma * sum_s' P(s'|s,a) V_s'(pi)``."""
    pi = _checked(mdp, pi)
    if v is None:
        v = _value(mdp, pi)
    return _q(mdp, v)


def _visitation(mdp, pi, rho):
    P_pi, _ = _induced(mdp, pi)
    A = (np.eye(mdp.num_states) - mdp.gamma * P_pi).T
    return (1.0 - mdp.gamma) * _solve(A, rho, "visitation")


def visitation(mdp, pi, rho):
    """Discounted state-visitation distribution ``d_rho(pi)``."""
    pi = _checked(mdp, pi)
    rho = check_distribution(rho, mdp.num_states, "rho")
    return _visitation(mdp, pi, rho)


def visitation_matrix(mdp, pi):
    """Matrix whose row ``s`` is ``d_s(pi)``: ``(1-gamma)(I - gamma P(pi))^{-1}``."""
    pi = _checked(mdp, pi)
    P_pi, _ = _induced(mdp, pi)
    n = mdp.num_states
    A = np.eye(n) - mdp.gamma * P_pi
    return (1.0 - mdp.gamma) * _solve(A, np.eye(n), "visitation_matrix")


def _gradient(mdp, pi, mu):
    v = _value(mdp, pi)
    d = _visitation(mdp, pi, mu)
    return d[:, None] * _q(mdp, v) / (1.0 - mdp.gamma)


def policy_gradient(mdp, pi, mu):
    """Gradient of ``V_mu`` with respect to the policy table.

    Block ``s`` equals ``d_{mu,s}(pi) * Q_s(pi) / (1 - gamma)``.
    """
    pi = _checked(mdp, pi)
    mu = check_distribution(mu, mdp.num_states, "mu")
    return _gradient(mdp, pi, mu)


def mismatch_coefficient(num, den):
    """``max_s num_s / den_s`` with ``0/0 = 1``; ``inf`` when ``den`` misses support."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    if num.shape != den.shape:
        raise ValidationError("distributions must have the same shape")
    pos = den > 0
    if np.any(num[~pos] > 0):
        return float("inf")
    ratios = np.ones_like(num)
    ratios[pos] = num[pos] / den[pos]
    return float(np.max(ratios))


def performance_difference(mdp, pi, pi_tilde, rho):
    """Both sides of the performance difference identity.

    Returns ``(lhs, rhs)`` with ``lhs = V_rho(pi) - V_rho(pi_tilde)`` from two value
    solves and ``rhs`` assembled from ``d_rho(pi)`` and ``Q(pi_tilde)``.
    """
    pi = _checked(mdp, pi)
    pi_tilde = check_policy(pi_tilde, mdp.num_states, mdp.num_actions, "pi_tilde")
    rho = check_distribution(rho, mdp.num_states, "rho")
    lhs = float(rho @ _value(mdp, pi) - rho @ _value(mdp, pi_tilde))
    d = _visitation(mdp, pi, rho)
    q_tilde = _q(mdp, _value(mdp, pi_tilde))
    inner = np.einsum("sa,sa->s", q_tilde, pi - pi_tilde)
    rhs = float(d @ inner / (1.0 - mdp.gamma))
    return lhs, rhs
