"""Inexact policy mirror descent: Q-estimate oracles, rollout estimation and sample plans.

Rollout estimates come in two simulation modes that share one distribution:

``trajectory``
    ``M`` independent truncated trajectories, each drawn by inverse-CDF lookup.
    Trajectory ``i`` consumes the uniforms ``[2 H i, 2 H (i+1))`` of its
    ``(iteration, state, action)`` stream.
``aggregate``
    The same ``M`` trajectories simulated jointly through their occupancy
    counts: the ``N_t(s, a)`` trajectories sitting at ``(s, a)`` at time ``t``
    split multinomially over next states, then over actions.  The estimate
    ``sum_t gamma^t sum_{s,a} N_t(s, a) R(s, a) / M`` depends on the trajectories
    only through these counts, so both modes give identically distributed
    estimates.  Cost is ``O(H S^2 A)`` per pair regardless of ``M``, which keeps
    plans with ``M`` in the billions tractable.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bounds as B
from . import rng
from .exceptions import PlanOverflowError, ValidationError
from .optimizers import _mirror_descent
from .schedules import StepSchedule
from .solvers import optimal_reference
from .validation import check_distribution, check_mdp, check_policy, uniform_distribution

INT64_MAX = np.iinfo(np.int64).max
# above this many simulated steps per pair, "auto" switches to aggregate mode
AUTO_TRAJECTORY_LIMIT = 2_000_000
MODES = ("auto", "trajectory", "aggregate")


@dataclass(frozen=True)
class SamplingPlan:
    """Iteration count ``K``, rollout horizon ``H`` and batch size ``M``."""

    K: int
    H: int
    M: int
    gamma: float
    theta_rho: float
    eps: float
    delta: float
    num_sa: int

    @property
    def tau(self):
        """High-probability bound ``2 gamma^H / (1-gamma)`` on ``||Q_hat - Q||_inf``."""
        return 2.0 * self.gamma**self.H / (1.0 - self.gamma)

    @property
    def bias_bound(self):
        return self.gamma**self.H / (1.0 - self.gamma)

    @property
    def total_samples(self):
        """Simulated transitions over the whole run (Python int, no overflow)."""
        return self.K * self.num_sa * self.M * self.H

    def bound(self):
        """Final-gap guarantee ``(1-1/theta)^K 2/(1-gamma) + 8 theta gamma^H/(1-gamma)^2``."""
        return B.sampled(self.K, self.H, self.theta_rho, self.gamma)

    def to_dict(self):
        return {
            "K": self.K,
            "H": self.H,
            "M": self.M,
            "gamma": self.gamma,
            "theta_rho": self.theta_rho,
            "eps": self.eps,
            "delta": self.delta,
            "num_sa": self.num_sa,
            "tau": self.tau,
            "bound": self.bound(),
            "total_samples": self.total_samples,
        }


def plan_sampling(gamma, theta_rho, eps, delta, num_sa):
    """Choose ``(K, H, M)`` so the sampled run reaches gap ``eps`` with probability ``1 - delta``.

    ``K = ceil(theta log(4/((1-gamma) eps)))``,
    ``H = ceil(log(16 theta/((1-gamma)^2 eps)) / (1-gamma))`` and
    ``M = ceil(gamma^(-2H)/2 * log(2 K num_sa / delta))``.

    Raises :class:`PlanOverflowError` (carrying ``H``) when ``M`` does not fit in
    a signed 64-bit integer.
    """
    if not 0.0 < gamma < 1.0:
        raise ValidationError("sampling plans need 0 < gamma < 1")
    if not (theta_rho >= 1.0 and math.isfinite(theta_rho)):
        raise ValidationError("theta_rho must be finite and >= 1")
    if not eps > 0 or not 0.0 < delta < 1.0:
        raise ValidationError("need eps > 0 and 0 < delta < 1")
    if num_sa < 1:
        raise ValidationError("num_sa must be >= 1")
    one_m = 1.0 - gamma
    K = max(1, math.ceil(theta_rho * math.log(4.0 / (one_m * eps))))
    H = max(1, math.ceil(math.log(16.0 * theta_rho / (one_m**2 * eps)) / one_m))
    log_terms = math.log(2.0 * K * num_sa / delta)
    log_m = -2.0 * H * math.log(gamma) - math.log(2.0) + math.log(log_terms)
    if log_m >= math.log(INT64_MAX):
        raise PlanOverflowError(
            f"batch size exp({log_m:.1f}) exceeds the int64 range at horizon H={H}", H
        )
    M = math.ceil(gamma ** (-2.0 * H) / 2.0 * log_terms)
    if M > INT64_MAX:
        raise PlanOverflowError(f"batch size {M} exceeds the int64 range at horizon H={H}", H)
    return SamplingPlan(K, H, max(M, 1), gamma, float(theta_rho), eps, delta, num_sa)


def _discounted_occupancy_value(mdp, occupancy, M):
    """``sum_t gamma^t sum_{s,a} (N_t(s,a)/M) R(s,a)`` from integer counts ``N_t``.

    Dividing the counts by ``M`` before weighting keeps point-mass occupancies
    exact, so ``H = 1`` returns ``R(s, a)`` bit for bit.
    """
    acc = 0.0
    disc = 1.0
    for counts in occupancy:
        acc += disc * float(np.sum((counts / M) * mdp.reward))
        disc *= mdp.gamma
    return acc


def _rollout_trajectories(mdp, pi, s, a, H, M, gen):
    S, A = mdp.num_states, mdp.num_actions
    cumP = np.cumsum(mdp.transition, axis=2)
    cumPi = np.cumsum(pi, axis=1)
    u = gen.random((M, H, 2))
    states = np.full(M, s, dtype=np.intp)
    actions = np.full(M, a, dtype=np.intp)
    occupancy = []
    for t in range(H):
        occupancy.append(np.bincount(states * A + actions, minlength=S * A).reshape(S, A))
        if t == H - 1:
            break
        nxt = (u[:, t, 0, None] >= cumP[states, actions]).sum(axis=1)
        states = np.minimum(nxt, S - 1)
        act = (u[:, t, 1, None] >= cumPi[states]).sum(axis=1)
        actions = np.minimum(act, A - 1)
    return _discounted_occupancy_value(mdp, occupancy, M)


def _rollout_aggregate(mdp, pi, s, a, H, M, gen):
    S, A = mdp.num_states, mdp.num_actions
    P2 = mdp.transition.reshape(S * A, S)
    counts = np.zeros((S, A), dtype=np.int64)
    counts[s, a] = M
    occupancy = []
    for t in range(H):
        occupancy.append(counts)
        if t == H - 1:
            break
        moved = gen.multinomial(counts.ravel(), P2).sum(axis=0)
        counts = gen.multinomial(moved, pi)
    return _discounted_occupancy_value(mdp, occupancy, M)


def rollout_q_estimate(mdp, pi, s, a, H, M, gen, mode="auto"):
    """Mean truncated discounted regret of ``M`` rollouts of length ``H`` from ``(s, a)``.

    ``E[estimate]`` lies in ``[Q(s,a) - gamma^H/(1-gamma), Q(s,a)]``.
    """
    if H < 1 or M < 1:
        raise ValidationError("H and M must be >= 1")
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}")
    if mode == "auto":
        mode = "trajectory" if M * H <= AUTO_TRAJECTORY_LIMIT else "aggregate"
    if mode == "trajectory":
        return _rollout_trajectories(mdp, pi, s, a, H, M, gen)
    return _rollout_aggregate(mdp, pi, s, a, H, M, gen)


def estimate_q_table(mdp, pi, H, M, master_seed, iteration=0, mode="auto", n_jobs=1):
    """Rollout estimate of the whole Q table.

    Pair ``(s, a)`` at iteration ``k`` draws from stream
    ``(master_seed, ROLLOUT, k, s*|A| + a)``, so the result is independent of
    ``n_jobs`` and of scheduling order.
    """
    check_mdp(mdp)
    S, A = mdp.num_states, mdp.num_actions
    pi = check_policy(pi, S, A)
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}")

    def one(idx):
        s, a = divmod(idx, A)
        gen = rng.stream(master_seed, rng.ROLLOUT, iteration, idx)
        return rollout_q_estimate(mdp, pi, s, a, H, M, gen, mode)

    if n_jobs is None or n_jobs <= 1:
        vals = [one(i) for i in range(S * A)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            vals = list(ex.map(one, range(S * A)))
    return np.array(vals).reshape(S, A)


class ExactOracle:
    """Returns the exact ``Q`` table."""

    tau = 0.0
    certified = True

    def __call__(self, mdp, k, pi, Q):
        return Q


class InjectedNoise:
    """``Q_hat = clip(Q + U, 0, 1/(1-gamma))`` with ``U ~ Uniform[-tau, tau]`` entrywise.

    Clipping to the range of ``Q`` never increases the error, so
    ``||Q_hat - Q||_inf <= tau`` holds surely.  ``tau = 0`` returns ``Q`` itself.
    """

    certified = True

    def __init__(self, tau, seed=0):
        if not tau >= 0:
            raise ValidationError("tau must be non-negative")
        self.tau = float(tau)
        self.seed = seed

    def __call__(self, mdp, k, pi, Q):
        if self.tau == 0.0:
            return Q
        gen = rng.stream(self.seed, rng.NOISE, k)
        noise = gen.uniform(-self.tau, self.tau, size=Q.shape)
        return np.clip(Q + noise, 0.0, 1.0 / (1.0 - mdp.gamma))


class RolloutOracle:
    """Monte-Carlo Q estimates with horizon ``H`` and batch ``M``.

    Its error bound ``tau = 2 gamma^H / (1-gamma)`` holds only with high
    probability, so violations it causes are reported as soft.
    """

    certified = False

    def __init__(self, H, M, seed=0, mode="auto", n_jobs=1, gamma=None):
        self.H = int(H)
        self.M = int(M)
        self.seed = seed
        self.mode = mode
        self.n_jobs = n_jobs
        self.tau = None if gamma is None else 2.0 * gamma**self.H / (1.0 - gamma)

    @classmethod
    def from_plan(cls, plan, seed=0, mode="auto", n_jobs=1):
        return cls(plan.H, plan.M, seed, mode, n_jobs, plan.gamma)

    def __call__(self, mdp, k, pi, Q):
        return estimate_q_table(mdp, pi, self.H, self.M, self.seed, k, self.mode, self.n_jobs)


def inexact_pmd_run(
    mdp,
    oracle,
    rho=None,
    kind="kl",
    schedule="geometric",
    steps=100,
    pi0=None,
    reference=None,
    blind=False,
    tol=None,
    strict=False,
    keep_policies=False,
):
    """Policy mirror descent driven by ``oracle(mdp, k, pi, Q) -> Q_hat``.

    With :class:`ExactOracle` (or zero noise) the iterates are bitwise identical
    to :func:`pmdlab.optimizers.pmd_run`.
    """
    tau = getattr(oracle, "tau", None)
    if tau is None and isinstance(oracle, RolloutOracle):
        tau = 2.0 * mdp.gamma**oracle.H / (1.0 - mdp.gamma)
    certified = bool(getattr(oracle, "certified", False))
    extra = {"oracle": type(oracle).__name__, "tau": tau}
    if isinstance(oracle, RolloutOracle):
        extra.update(H=oracle.H, M=oracle.M, seed=oracle.seed)
    elif isinstance(oracle, InjectedNoise):
        extra.update(seed=oracle.seed)
    return _mirror_descent(
        mdp, rho, kind, schedule, steps, pi0,
        lambda k, pi, Q: oracle(mdp, k, pi, Q),
        tau, certified, reference, blind, tol, strict, keep_policies, extra,
    )


def sampled_pmd_run(mdp, eps, delta, rho=None, kind="kl", seed=0, mode="auto", n_jobs=1,
                    reference=None):
    """Plan ``(K, H, M)`` for ``eps``/``delta`` and run ``K`` rollout-driven PMD steps.

    Uses the ``theta_ratio`` schedule with ``eta_0 >= (1-gamma) D*_0 / gamma``.
    Returns ``(trace, plan)``; ``trace.config["sampled_bound"]`` is the guarantee.
    """
    check_mdp(mdp)
    S, A = mdp.num_states, mdp.num_actions
    rho = uniform_distribution(S) if rho is None else check_distribution(rho, S, "rho")
    ref = optimal_reference(mdp, rho) if reference is None else reference
    plan = plan_sampling(mdp.gamma, ref.theta_rho, eps, delta, S * A)
    oracle = RolloutOracle.from_plan(plan, seed=seed, mode=mode, n_jobs=n_jobs)
    schedule = StepSchedule.theta_ratio() if ref.theta_rho > 1 else StepSchedule.geometric()
    trace = inexact_pmd_run(
        mdp, oracle, rho=rho, kind=kind, schedule=schedule, steps=plan.K, reference=ref
    )
    trace.config["plan"] = plan.to_dict()
    trace.config["sampled_bound"] = plan.bound()
    return trace, plan
