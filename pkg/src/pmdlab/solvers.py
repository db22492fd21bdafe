"""Ground-truth solvers and the optimality-referenced constants used by bound checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._config import get_tolerances
from .exceptions import NonUniqueStationaryError, SolverError
from .mdp import _induced, _q, _value, _visitation, mismatch_coefficient
from .validation import check_distribution, check_mdp, check_policy


def greedy_policy(Q, tie=None):
    """Deterministic policy on ``argmin_a Q[s, a]``; near-ties go to the lowest index."""
    tie = get_tolerances().tie if tie is None else tie
    Q = np.asarray(Q, dtype=float)
    best = Q.min(axis=1, keepdims=True)
    # first index within `tie` of the minimum
    actions = np.argmax(Q <= best + tie, axis=1)
    pi = np.zeros_like(Q)
    pi[np.arange(Q.shape[0]), actions] = 1.0
    return pi


def policy_improvement(mdp, pi):
    """One policy-iteration step from an arbitrary (possibly stochastic) policy."""
    pi = check_policy(pi, mdp.num_states, mdp.num_actions)
    return greedy_policy(_q(mdp, _value(mdp, pi)))


def policy_iteration(mdp, pi0=None, max_iter=None):
    """Howard's policy iteration.

    Returns
    -------
    pi_star : ndarray of shape (S, A)
        Deterministic, greedy-stable optimal policy.
    v_star : ndarray of shape (S,)
    n_iter : int
        Number of improvement steps taken.
    """
    check_mdp(mdp)
    S, A = mdp.num_states, mdp.num_actions
    cap = 10 * S * A if max_iter is None else max_iter
    pi = np.zeros((S, A))
    pi[:, 0] = 1.0
    if pi0 is not None:
        pi = greedy_policy(check_policy(pi0, S, A))
    for n_iter in range(1, cap + 1):
        v = _value(mdp, pi)
        new = greedy_policy(_q(mdp, v))
        if np.array_equal(new, pi):
            return pi, v, n_iter
        pi = new
    raise SolverError(f"policy iteration did not terminate within {cap} iterations")


def value_iteration_oracle(mdp, tol, return_n_iter=False):
    """Bellman fixed-point iteration from ``V = 0`` with an a-priori iteration count.

    Since ``0 <= V* <= 1/(1-gamma)``, ``n`` sweeps leave an error of at most
    ``gamma**n / (1-gamma)``; ``n`` is the smallest count making that ``<= tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    check_mdp(mdp)
    g = mdp.gamma
    if g == 0.0:
        n = 1
    else:
        n = max(1, math.ceil(math.log(tol * (1.0 - g)) / math.log(g)))
    v = np.zeros(mdp.num_states)
    for _ in range(n):
        v = _q(mdp, v).min(axis=1)
    return (v, n) if return_n_iter else v


def stationary_distribution(mdp, pi):
    """Stationary distribution of ``P(pi)`` from the normalized augmented system.

    Raises :class:`NonUniqueStationaryError` when ``P(pi)^T - I`` has rank below
    ``S - 1`` (several recurrent classes).
    """
    check_mdp(mdp)
    pi = check_policy(pi, mdp.num_states, mdp.num_actions)
    P_pi, _ = _induced(mdp, pi)
    n = mdp.num_states
    M = P_pi.T - np.eye(n)
    if n > 1 and np.linalg.matrix_rank(M, tol=1e-10 * n) < n - 1:
        raise NonUniqueStationaryError("induced chain has more than one recurrent class")
    M[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        x = np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise NonUniqueStationaryError("augmented stationary system is singular") from exc
    x[np.abs(x) < 1e-13] = 0.0
    if np.any(x < 0):
        raise SolverError("stationary solve produced negative mass")
    x /= x.sum()
    if np.max(np.abs(x @ P_pi - x)) > 1e-9:
        raise SolverError("stationary residual exceeds tolerance")
    return x


@dataclass(frozen=True)
class OptimalReference:
    """Optimal policy of an MDP together with the mismatch constants for a given ``rho``."""

    pi_star: np.ndarray
    v_star: np.ndarray
    rho: np.ndarray
    d_rho_star: np.ndarray
    c_star_rho: float
    theta_rho: float
    gamma: float
    pi_iterations: int = 0

    @property
    def v_star_rho(self):
        return float(self.rho @ self.v_star)


def optimal_reference(mdp, rho):
    """Assemble ``pi*``, ``V*``, ``d_rho(pi*)``, ``C*_rho`` and ``theta_rho``."""
    check_mdp(mdp)
    rho = check_distribution(rho, mdp.num_states, "rho")
    pi_star, v_star, n_iter = policy_iteration(mdp)
    d_star = _visitation(mdp, pi_star, rho)
    c_star = mismatch_coefficient(d_star, rho)
    return OptimalReference(
        pi_star=pi_star,
        v_star=v_star,
        rho=rho,
        d_rho_star=d_star,
        c_star_rho=c_star,
        theta_rho=c_star / (1.0 - mdp.gamma),
        gamma=mdp.gamma,
        pi_iterations=n_iter,
    )
