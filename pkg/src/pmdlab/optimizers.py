"""Projected policy gradient and policy mirror descent with per-iteration diagnostics.

Each run returns a :class:`RunTrace`.  When an :class:`~pmdlab.solvers.OptimalReference`
is available the trace carries the optimality gap ``delta_k``, ``D*_k``, ``theta_k``
and every applicable convergence envelope, and each envelope or invariant that
fails beyond its slack is listed in ``trace.violations``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import bounds as B
from ._config import get_tolerances
from .exceptions import BoundViolation, ValidationError
from .mdp import _gradient, _induced, _q, _value, _visitation, mismatch_coefficient
from .schedules import as_schedule, meets_linear_condition, step_eta
from .simplex import as_kind, mirror_update, project_simplex, weighted_divergence
from .solvers import optimal_reference
from .validation import (
    check_distribution,
    check_mdp,
    check_policy,
    is_interior,
    uniform_distribution,
    uniform_policy,
)

CSV_BOUNDS = {
    "bound_ppg": "ppg_thm1",
    "bound_weakdom": "weak_dom",
    "bound_sublinear": "pmd_sublinear",
    "bound_linear": "pmd_linear",
    "bound_inexact": "inexact",
}
CSV_HEADER = [
    "k", "eta_k", "v_rho", "delta_k", "dstar_k", "theta_k", "grad_map_norm",
    *CSV_BOUNDS, "q_err_inf", "floor_events",
]


@dataclass
class IterationRecord:
    k: int
    eta_k: float
    v_rho: float
    delta_k: Optional[float] = None
    dstar_k: Optional[float] = None
    theta_k: Optional[float] = None
    grad_map_norm: Optional[float] = None
    floor_events: int = 0
    bounds: dict = field(default_factory=dict)
    q_err_inf: Optional[float] = None
    transition_gap: Optional[float] = None  # ||P(pi^k) - P(pi*)||_inf


@dataclass
class RunTrace:
    records: list
    config: dict
    status: str = "completed"
    violations: list = field(default_factory=list)
    soft_violations: list = field(default_factory=list)
    policy: Optional[np.ndarray] = None
    policies: Optional[list] = None
    reference: object = None

    @property
    def deltas(self):
        return np.array([np.nan if r.delta_k is None else r.delta_k for r in self.records])

    @property
    def values(self):
        return np.array([r.v_rho for r in self.records])

    def column(self, name):
        return [getattr(r, name) for r in self.records]

    @property
    def floor_events(self):
        return sum(r.floor_events for r in self.records)

    def to_csv(self, path):
        """One row per iterate; absent quantities are empty cells."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for r in self.records:
                row = [r.k, r.eta_k, r.v_rho, r.delta_k, r.dstar_k, r.theta_k, r.grad_map_norm]
                row += [r.bounds.get(name) for name in CSV_BOUNDS.values()]
                row += [r.q_err_inf, r.floor_events]
                writer.writerow(["" if x is None else repr(x) if isinstance(x, float) else x for x in row])
        return path

    def summary(self):
        last = self.records[-1]
        out = {
            "status": self.status,
            "iterations": last.k,
            "final_v_rho": last.v_rho,
            "final_delta": last.delta_k,
            "floor_events": self.floor_events,
            "violations": self.violations,
            "soft_violations": self.soft_violations,
            "config": self.config,
        }
        if self.policy is not None:
            out["policy"] = self.policy.tolist()
        return out


class _Checker:
    """Collects invariant/bound outcomes; hard failures mark the run."""

    def __init__(self, trace, strict):
        self.trace = trace
        self.strict = strict

    def check(self, name, k, measured, bound, soft=False):
        if measured is None or bound is None:
            return True
        if not (measured <= bound):
            entry = {"check": name, "k": int(k), "measured": float(measured), "bound": float(bound)}
            if soft:
                self.trace.soft_violations.append(entry)
            else:
                self.trace.violations.append(entry)
                if self.strict:
                    raise BoundViolation(name, k, measured, bound)
            return False
        return True


def _reference_for(mdp, rho, reference, blind):
    if blind:
        return None
    if reference is None:
        return optimal_reference(mdp, rho)
    return reference


def _init_policy(mdp, pi0, kind=None):
    if pi0 is None:
        return uniform_policy(mdp.num_states, mdp.num_actions)
    pi = check_policy(pi0, mdp.num_states, mdp.num_actions, "pi0").copy()
    if kind is not None and kind.value == "kl" and not is_interior(pi):
        raise ValidationError("KL geometry needs an interior initial policy")
    return pi


def gradient_mapping(mdp, pi, mu, L):
    """Projected-gradient successor ``T_L(pi)`` and gradient mapping ``G_L(pi)``.

    Returns ``(t_l, g_l, g_l_norm)`` with ``g_l = L (pi - t_l)``.
    """
    if not L > 0:
        raise ValidationError("L must be positive")
    check_mdp(mdp)
    pi = check_policy(pi, mdp.num_states, mdp.num_actions)
    mu = check_distribution(mu, mdp.num_states, "mu")
    return _gradient_mapping(mdp, pi, mu, L)


def _gradient_mapping(mdp, pi, mu, L):
    grad = _gradient(mdp, pi, mu)
    step = pi - grad / L
    t = np.array([project_simplex(row) for row in step])
    g = L * (pi - t)
    return t, g, float(np.sqrt(np.sum(g * g)))


def _transition_gap(mdp, pi, ref):
    P_k, _ = _induced(mdp, pi)
    P_s, _ = _induced(mdp, ref.pi_star)
    return float(np.max(np.abs(P_k - P_s).sum(axis=1)))


def ppg_run(
    mdp,
    mu=None,
    rho=None,
    steps=100,
    eta=None,
    pi0=None,
    reference=None,
    blind=False,
    tol=None,
    strict=False,
    keep_policies=False,
    mu_hat=None,
):
    """Projected policy gradient ``pi <- proj(pi - eta grad V_mu(pi))``.

    ``eta=None`` uses ``1/L`` with ``L = 2 gamma |A| / (1-gamma)^3`` (``1.0`` when
    ``gamma = 0``).  Envelope checks against the O(1/k) rates are made only for
    that default step with ``rho == mu``.

    ``mu_hat > 0`` requests the strong-dominance diagnostic: the geometric
    recursion ``F_k - F* <= (1 + mu_hat/L)^-k (F_0 - F*)`` (``F = V_mu``) is tested
    only if ``||G_L||^2 / 2 >= mu_hat (F(T_L pi) - F*)`` held at every iterate.
    The outcome is stored in ``trace.config["strong_dominance"]``.
    """
    check_mdp(mdp)
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    S, A, g = mdp.num_states, mdp.num_actions, mdp.gamma
    rho = uniform_distribution(S) if rho is None else check_distribution(rho, S, "rho")
    mu = rho.copy() if mu is None else check_distribution(mu, S, "mu")
    pi = _init_policy(mdp, pi0)
    L = 2.0 * g * A / (1.0 - g) ** 3
    default_step = eta is None
    if eta is None:
        eta = 1.0 / L if g > 0 else 1.0
    elif not eta > 0:
        raise ValidationError("eta must be positive")
    eta = float(eta)
    L_eff = 1.0 / eta
    ref = _reference_for(mdp, rho, reference, blind)
    tolr = get_tolerances()

    config = {
        "algorithm": "ppg",
        "steps": steps,
        "eta": eta,
        "default_step": default_step,
        "L": L,
        "gamma": g,
        "num_states": S,
        "num_actions": A,
        "rho": rho.tolist(),
        "mu": mu.tolist(),
        "blind": ref is None,
    }
    trace = RunTrace([], config, reference=ref, policies=[] if keep_policies else None)
    chk = _Checker(trace, strict)

    same = np.array_equal(rho, mu)
    envelope = default_step and same and g > 0 and ref is not None
    ctx = None
    c_mu = None
    if ref is not None:
        c_star = ref.c_star_rho
        c_mu = mismatch_coefficient(ref.d_rho_star, mu)
        config.update(theta_rho=ref.theta_rho, c_star_rho=c_star)
        delta0 = float(rho @ _value(mdp, pi)) - ref.v_star_rho
        if envelope and math.isfinite(c_star):
            sp = B.smoothness(g, S, A, c_star)
            config.update(omega=sp.omega)
            ctx = B.BoundContext(g, S, A, c_star=c_star, delta0=delta0, L=sp.lipschitz_L, omega=sp.omega)
    evaluators = B.theoretical_bounds(ctx) if ctx is not None else {}
    check_descent = default_step and g > 0

    v = _value(mdp, pi)
    f_values, g_norms = [], []
    for k in range(steps + 1):
        f_values.append(float(mu @ v))
        rec = IterationRecord(k=k, eta_k=eta, v_rho=float(rho @ v))
        if ref is not None:
            rec.delta_k = rec.v_rho - ref.v_star_rho
            rec.theta_k = mismatch_coefficient(ref.d_rho_star, _visitation(mdp, pi, rho))
            rec.transition_gap = _transition_gap(mdp, pi, ref)
            for name, fn in evaluators.items():
                if name in ("ppg_thm1", "weak_dom") and k >= 1:
                    rec.bounds[name] = fn(k)
                    chk.check(name, k, rec.delta_k, rec.bounds[name] + tolr.bound_slack)
        if keep_policies:
            trace.policies.append(pi.copy())
        stop = k == steps or (tol is not None and rec.delta_k is not None and rec.delta_k <= tol)
        if stop:
            trace.records.append(rec)
            if k < steps:
                trace.status = "converged"
            break
        t, _, gnorm = _gradient_mapping(mdp, pi, mu, L_eff)
        rec.grad_map_norm = gnorm
        g_norms.append(gnorm)
        trace.records.append(rec)
        v_next = _value(mdp, t)
        if check_descent:
            drop = float(mu @ v - mu @ v_next)
            chk.check("ppg_descent", k, gnorm**2 / (2.0 * L_eff) - drop, tolr.bound_slack)
        if ref is not None and check_descent and math.isfinite(c_mu):
            post = float(rho @ v_next) - ref.v_star_rho
            gap_vs_mapping = 2.0 * math.sqrt(2.0 * S) / (1.0 - g) * c_mu * gnorm
            chk.check("gap_vs_mapping", k, post, gap_vs_mapping + tolr.bound_slack)
        pi, v = t, v_next

    if mu_hat is not None and ref is not None and g_norms:
        f_star = float(mu @ ref.v_star)
        gaps = [f - f_star for f in f_values]
        held, ok = B.strong_dominance_check(
            gaps[: len(g_norms)], gaps[1 : len(g_norms) + 1], g_norms, L_eff, mu_hat,
            tolr.bound_slack,
        )
        config["strong_dominance"] = {"mu_hat": mu_hat, "condition_held": held, "recursion_ok": ok}
        if ok is False:
            chk.check("strong_dominance", len(g_norms), 1.0, 0.0)
    trace.policy = pi
    if trace.violations:
        trace.status = "bound_violation"
    return trace


def _default_eta(schedule, kind, mdp, dstar0):
    g = mdp.gamma
    if schedule.kind == "constant":
        # covers D*_0 for a uniform start: 1/2 ||.||^2 <= 1 and KL <= log|A|
        scale = 1.0 if kind.value == "euclidean" else max(math.log(mdp.num_actions), 1.0)
        if dstar0 is not None and math.isfinite(dstar0):
            scale = max(scale, dstar0)
        return (1.0 - g) * scale
    if dstar0 is None or g == 0:
        return 1.0
    return max((1.0 - g) * dstar0 / g, 1e-8)


def _mirror_descent(
    mdp,
    rho,
    kind,
    schedule,
    steps,
    pi0,
    q_source: Optional[Callable],
    tau,
    tau_certified,
    reference,
    blind,
    tol,
    strict,
    keep_policies,
    config_extra,
):
    check_mdp(mdp)
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    S, A, g = mdp.num_states, mdp.num_actions, mdp.gamma
    kind = as_kind(kind)
    schedule = as_schedule(schedule)
    rho = uniform_distribution(S) if rho is None else check_distribution(rho, S, "rho")
    pi = _init_policy(mdp, pi0, kind)
    ref = _reference_for(mdp, rho, reference, blind)
    tolr = get_tolerances()
    exact = q_source is None or tau == 0.0

    theta = ref.theta_rho if ref is not None else None
    dstar0 = None
    if ref is not None:
        dstar0 = weighted_divergence(kind, ref.pi_star, pi, ref.d_rho_star)
    if schedule.eta is None:
        schedule = schedule.with_eta(_default_eta(schedule, kind, mdp, dstar0))
    eta_at = lambda k: step_eta(schedule, k, g, theta)  # noqa: E731
    eta_at(0)  # surface schedule misuse before iterating

    config = {
        "algorithm": "pmd" if q_source is None else "inexact-pmd",
        "geometry": kind.value,
        "schedule": schedule.kind,
        "eta0": schedule.eta,
        "ratio": schedule.ratio,
        "steps": steps,
        "gamma": g,
        "num_states": S,
        "num_actions": A,
        "rho": rho.tolist(),
        "blind": ref is None,
    }
    config.update(config_extra)
    trace = RunTrace([], config, reference=ref, policies=[] if keep_policies else None)
    chk = _Checker(trace, strict)

    evaluators = {}
    rho_pos = bool(np.all(rho > 0))
    if ref is not None:
        v0 = _value(mdp, pi)
        delta0 = float(rho @ v0) - ref.v_star_rho
        config.update(theta_rho=theta, c_star_rho=ref.c_star_rho, dstar0=dstar0, delta0=delta0)
        finite = math.isfinite(theta)
        ctx = B.BoundContext(
            g,
            S,
            A,
            c_star=ref.c_star_rho,
            theta_rho=theta if finite else None,
            delta0=delta0,
            dstar0=dstar0 if math.isfinite(dstar0) else None,
            eta=schedule.eta if schedule.kind == "constant" else None,
            eta0=schedule.eta if meets_linear_condition(schedule, g, theta) else None,
            tau=tau if (tau is not None and schedule.increasing and finite) else None,
        )
        evaluators = B.theoretical_bounds(ctx)
        evaluators.pop("ppg_thm1", None)
        if not exact:
            # the exact-Q envelopes do not apply under inexact evaluations
            evaluators.pop("pmd_sublinear", None)
            evaluators.pop("pmd_linear", None)
        elif "inexact" in evaluators and q_source is None:
            evaluators.pop("inexact")
        if not meets_linear_condition(schedule, g, theta):
            evaluators.pop("inexact", None)

    def evaluate(pi_k):
        v_k = _value(mdp, pi_k)
        return v_k, _q(mdp, v_k)

    v, Q = evaluate(pi)
    prev = None  # (record, Q_used) of the previous iterate
    for k in range(steps + 1):
        eta_k = eta_at(k)
        rec = IterationRecord(k=k, eta_k=eta_k, v_rho=float(rho @ v))
        if ref is not None:
            rec.delta_k = rec.v_rho - ref.v_star_rho
            rec.dstar_k = weighted_divergence(kind, ref.pi_star, pi, ref.d_rho_star)
            rec.theta_k = mismatch_coefficient(ref.d_rho_star, _visitation(mdp, pi, rho))
            rec.transition_gap = _transition_gap(mdp, pi, ref)
            for name, fn in evaluators.items():
                rec.bounds[name] = fn(k)
                soft = name == "inexact" and not tau_certified
                chk.check(name, k, rec.delta_k, rec.bounds[name] + tolr.bound_slack, soft=soft)
            if rho_pos and math.isfinite(theta):
                chk.check("theta_bound", k, rec.theta_k, theta + tolr.bound_slack)
        if prev is not None:
            p = prev
            rise = rec.v_rho - p.v_rho
            if exact:
                chk.check("monotone", k - 1, rise, tolr.descent)
                if ref is not None and rec.theta_k is not None and math.isfinite(rec.theta_k):
                    lhs = rec.theta_k * (rec.delta_k - p.delta_k) + p.delta_k
                    rhs = (p.dstar_k - rec.dstar_k) / ((1.0 - g) * p.eta_k)
                    if math.isfinite(rhs):
                        chk.check("master_recursion", k - 1, lhs, rhs + tolr.bound_slack)
            else:
                chk.check(
                    "inexact_increase",
                    k - 1,
                    rise,
                    2.0 * tau / (1.0 - g) + tolr.bound_slack,
                    soft=not tau_certified,
                )
        if keep_policies:
            trace.policies.append(pi.copy())
        trace.records.append(rec)
        if k == steps or (tol is not None and rec.delta_k is not None and rec.delta_k <= tol):
            if k < steps:
                trace.status = "converged"
            break

        Q_used = Q if q_source is None else q_source(k, pi, Q)
        if q_source is not None and S * A <= 10_000:
            rec.q_err_inf = float(np.max(np.abs(Q_used - Q)))
            if tau is not None:
                chk.check("assumption_tau", k, rec.q_err_inf, tau, soft=not tau_certified)
        new_pi, floors = mirror_update(kind, pi, Q_used, eta_k)
        descent = float(np.max(np.einsum("sa,sa->s", Q_used, new_pi - pi)))
        chk.check("q_descent", k, descent, tolr.descent * max(1.0, float(np.max(np.abs(Q_used)))))
        # floor events belong to the step taken from iterate k
        rec.floor_events = floors
        pi = new_pi
        v, Q = evaluate(pi)
        prev = rec

    trace.policy = pi
    if trace.violations:
        trace.status = "bound_violation"
    return trace


def pmd_run(
    mdp,
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
    """Exact policy mirror descent with the per-state update
    ``pi_s <- argmin_p eta_k <Q_s(pi), p> + D(p, pi_s)``.
    """
    return _mirror_descent(
        mdp, rho, kind, schedule, steps, pi0, None, None, True,
        reference, blind, tol, strict, keep_policies, {},
    )
