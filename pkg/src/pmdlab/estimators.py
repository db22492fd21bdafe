"""scikit-learn style wrappers around :mod:`pmdlab.optimizers`.

``fit`` takes an MDP (a :class:`~pmdlab.mdp.Dmdp`, a :class:`LoadedInstance` or a
path to an instance file) in place of a data matrix.
"""

from __future__ import annotations

import os

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .instances import LoadedInstance, load
from .mdp import Dmdp, _value
from .optimizers import pmd_run, ppg_run
from .sampling import ExactOracle, inexact_pmd_run
from .schedules import StepSchedule
from .validation import check_distribution, check_mdp, uniform_distribution


def _resolve(X, rho, mu=None):
    if isinstance(X, (str, os.PathLike)):
        X = load(X)
    if isinstance(X, LoadedInstance):
        mdp = X.mdp
        rho = X.rho if rho is None else rho
        mu = X.mu if mu is None else mu
    elif isinstance(X, Dmdp):
        mdp = X
    else:
        raise TypeError(f"expected an MDP or an instance path, got {type(X).__name__}")
    check_mdp(mdp)
    S = mdp.num_states
    rho = uniform_distribution(S) if rho is None else check_distribution(rho, S, "rho")
    return mdp, rho, mu


class _PolicyEstimator(BaseEstimator):
    def _finish(self, mdp, rho, trace):
        self.policy_ = trace.policy
        self.trace_ = trace
        self.reference_ = trace.reference
        self.n_iter_ = len(trace.records) - 1
        self.rho_ = rho
        self.mdp_ = mdp
        return self

    def predict(self, X=None):
        """Greedy action per state (lowest index on ties)."""
        check_is_fitted(self, "policy_")
        return np.argmax(self.policy_, axis=1)

    def predict_proba(self, X=None):
        check_is_fitted(self, "policy_")
        return self.policy_.copy()

    def score(self, X=None, y=None):
        """``-V_rho`` of the fitted policy (higher is better)."""
        check_is_fitted(self, "policy_")
        if X is None:
            mdp, rho = self.mdp_, self.rho_
        else:
            mdp, rho, _ = _resolve(X, None)
        return -float(rho @ _value(mdp, self.policy_))


class PolicyMirrorDescent(_PolicyEstimator):
    """Policy mirror descent.

    Parameters
    ----------
    divergence : {"kl", "euclidean"}
    schedule : {"geometric", "constant", "theta_ratio"}
    eta : float, optional
        Constant step or initial step; ``None`` picks a default that meets the
        step condition of the chosen schedule.
    ratio : float, optional
        Geometric growth factor (defaults to ``1/gamma``).
    n_iter : int
    q_oracle : callable, optional
        ``oracle(mdp, k, pi, Q) -> Q_hat``; exact Q when ``None``.
    tol : float, optional
        Stop once the optimality gap drops to ``tol``.
    blind : bool
        Skip the optimal-policy reference (no gaps or bound checks).
    strict : bool
        Raise :class:`~pmdlab.exceptions.BoundViolation` on the first violation.
    """

    def __init__(
        self,
        divergence="kl",
        schedule="geometric",
        eta=None,
        ratio=None,
        n_iter=100,
        rho=None,
        pi0=None,
        q_oracle=None,
        tol=None,
        blind=False,
        strict=False,
    ):
        self.divergence = divergence
        self.schedule = schedule
        self.eta = eta
        self.ratio = ratio
        self.n_iter = n_iter
        self.rho = rho
        self.pi0 = pi0
        self.q_oracle = q_oracle
        self.tol = tol
        self.blind = blind
        self.strict = strict

    def fit(self, X, y=None):
        mdp, rho, _ = _resolve(X, self.rho)
        sched = StepSchedule(self.schedule, self.eta, self.ratio)
        kw = dict(
            rho=rho, kind=self.divergence, schedule=sched, steps=self.n_iter, pi0=self.pi0,
            blind=self.blind, tol=self.tol, strict=self.strict,
        )
        if self.q_oracle is None or isinstance(self.q_oracle, ExactOracle):
            trace = pmd_run(mdp, **kw)
        else:
            trace = inexact_pmd_run(mdp, self.q_oracle, **kw)
        return self._finish(mdp, rho, trace)


class ProjectedPolicyGradient(_PolicyEstimator):
    """Projected policy gradient on the direct parametrization.

    ``eta=None`` uses ``(1-gamma)^3 / (2 gamma |A|)``.
    """

    def __init__(self, eta=None, n_iter=500, mu=None, rho=None, pi0=None, tol=None,
                 blind=False, strict=False):
        self.eta = eta
        self.n_iter = n_iter
        self.mu = mu
        self.rho = rho
        self.pi0 = pi0
        self.tol = tol
        self.blind = blind
        self.strict = strict

    def fit(self, X, y=None):
        mdp, rho, mu = _resolve(X, self.rho, self.mu)
        trace = ppg_run(
            mdp, mu=mu, rho=rho, steps=self.n_iter, eta=self.eta, pi0=self.pi0,
            blind=self.blind, tol=self.tol, strict=self.strict,
        )
        return self._finish(mdp, rho, trace)
