"""Self-verification battery.

Every check compares two independent routes to the same quantity, or tests an
invariant that holds on every instance.  :func:`mutated` plants a known bug so
the battery can be shown to catch it.
"""

from __future__ import annotations

import contextlib
import itertools
import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng, simplex
from ._config import get_tolerances
from .instances import InstanceSpec, generate, to_document
from .mdp import _q, _value, performance_difference, policy_gradient, value_rho
from .optimizers import pmd_run, ppg_run
from .sampling import InjectedNoise, estimate_q_table, inexact_pmd_run, plan_sampling
from .solvers import optimal_reference, policy_iteration, value_iteration_oracle
from .validation import uniform_distribution

SCOPES = {
    # (instances, max |S|, max |A|, PMD steps, PPG steps)
    "quick": (10, 6, 3, 200, 50),
    "full": (100, 12, 5, 200, 200),
}
GAMMAS = (0.8, 0.9, 0.95)


@dataclass
class CheckReport:
    name: str
    passed: bool = True
    n_cases: int = 0
    n_failures: int = 0
    worst: float = 0.0
    counterexample: Optional[dict] = None
    counterexample_path: Optional[str] = None

    def fail(self, measured, detail):
        self.passed = False
        self.n_failures += 1
        if self.counterexample is None:
            self.counterexample = detail
        self.worst = max(self.worst, float(measured))

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "n_cases": self.n_cases,
            "n_failures": self.n_failures,
            "worst": self.worst,
            "counterexample_path": self.counterexample_path,
        }


@dataclass
class SuiteReport:
    scope: str
    seed: int
    checks: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def failed_checks(self):
        return [n for n, c in self.checks.items() if not c.passed]

    def to_dict(self):
        return {
            "scope": self.scope,
            "seed": self.seed,
            "passed": self.passed,
            "elapsed_seconds": self.elapsed,
            "checks": [c.to_dict() for c in self.checks.values()],
        }


# ---------------------------------------------------------------- mutations

def _kl_logits_sign_flipped(log_p, q, eta):
    return log_p + eta * q


def _simplex_threshold_off_by_one(w):
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    r = np.nonzero(u - (css - 1.0) / j > 0)[0][-1]
    return (css[r] - 1.0) / max(r, 1)


MUTATIONS = {
    "kl-sign": ("_kl_logits", _kl_logits_sign_flipped),
    "projection-off-by-one": ("_simplex_threshold", _simplex_threshold_off_by_one),
}


@contextlib.contextmanager
def mutated(name):
    """Temporarily install a known bug: ``kl-sign`` or ``projection-off-by-one``."""
    if name not in MUTATIONS:
        raise ValueError(f"unknown mutation {name!r}; choose from {sorted(MUTATIONS)}")
    attr, bad = MUTATIONS[name]
    good = getattr(simplex, attr)
    setattr(simplex, attr, bad)
    try:
        yield
    finally:
        setattr(simplex, attr, good)


# ---------------------------------------------------------------- oracles

def projection_oracle(v):
    """Euclidean simplex projection by exhaustive support enumeration.

    For each support ``I`` the KKT point is ``p_I = v_I - (sum v_I - 1)/|I|``;
    the projection is the feasible candidate nearest to ``v``.
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    best, best_dist = None, math.inf
    for size in range(1, n + 1):
        for support in itertools.combinations(range(n), size):
            idx = list(support)
            p = np.zeros(n)
            p[idx] = v[idx] - (v[idx].sum() - 1.0) / size
            if np.any(p[idx] < 0):
                continue
            dist = float(np.sum((p - v) ** 2))
            if dist < best_dist:
                best, best_dist = p, dist
    return best


def kl_step_oracle(p, q, eta):
    """Closed-form multiplicative-weights step, computed without logarithms."""
    w = p * np.exp(-eta * (q - q.min()))
    return w / w.sum()


def enumerate_optimal_values(mdp):
    """``min`` of ``V(pi)`` over every deterministic policy, statewise."""
    S, A = mdp.num_states, mdp.num_actions
    best = np.full(S, math.inf)
    eye = np.eye(A)
    for choice in itertools.product(range(A), repeat=S):
        v = _value(mdp, eye[list(choice)])
        best = np.minimum(best, v)
    return best


# ---------------------------------------------------------------- battery

def _battery(scope, seed):
    n, max_s, max_a, _, _ = SCOPES[scope]
    out = []
    for i in range(n):
        g = rng.stream(seed, rng.BATTERY, i)
        gamma = float(GAMMAS[i % len(GAMMAS)])
        inst_seed = int(g.integers(0, 2**62))
        if i == n - 1:
            spec = InstanceSpec(kind="chain", gamma=gamma, length=min(max_s, 5))
        else:
            spec = InstanceSpec(
                kind="random",
                gamma=gamma,
                seed=inst_seed,
                num_states=int(g.integers(2, max_s + 1)),
                num_actions=int(g.integers(2, max_a + 1)),
            )
        mdp = generate(spec)
        if i % 2 == 0:
            rho = uniform_distribution(mdp.num_states)
        else:
            rho = g.dirichlet(np.ones(mdp.num_states)) * 0.9 + 0.1 / mdp.num_states
        out.append((spec, mdp, rho, g))
    return out


def _random_policy(g, S, A):
    return g.dirichlet(np.ones(A), size=S)


def _check_pdl(rep, mdp, rho, g, ctx):
    for _ in range(3):
        pi, pt = _random_policy(g, *mdp.transition.shape[:2]), _random_policy(g, *mdp.transition.shape[:2])
        lhs, rhs = performance_difference(mdp, pi, pt, rho)
        rep.n_cases += 1
        if abs(lhs - rhs) > 1e-9:
            rep.fail(abs(lhs - rhs), dict(ctx, pi=pi.tolist(), pi_tilde=pt.tolist(), lhs=lhs, rhs=rhs))


def _check_gradient(rep, mdp, rho, g, ctx):
    S, A = mdp.num_states, mdp.num_actions
    h = 1e-6
    for _ in range(2):
        pi = 0.5 * _random_policy(g, S, A) + 0.5 / A
        grad = policy_gradient(mdp, pi, rho)
        fd = np.empty_like(pi)
        for s in range(S):
            for a in range(A):
                e = np.zeros_like(pi)
                e[s, a] = h
                fd[s, a] = (value_rho(mdp, pi + e, rho) - value_rho(mdp, pi - e, rho)) / (2 * h)
        err = float(np.max(np.abs(fd - grad)) / max(np.max(np.abs(grad)), 1e-12))
        rep.n_cases += 1
        if err > 1e-5:
            rep.fail(err, dict(ctx, pi=pi.tolist(), relative_error=err))


def _check_projection(rep, mdp, rho, g, ctx):
    A = mdp.num_actions
    for _ in range(5):
        v = g.normal(size=A) * g.choice([0.1, 1.0, 10.0])
        p = simplex.project_simplex(v)
        o = projection_oracle(v)
        err = float(np.max(np.abs(p - o)))
        rep.n_cases += 1
        if err > 1e-12 or abs(p.sum() - 1.0) > 1e-12:
            rep.fail(max(err, abs(p.sum() - 1.0)), dict(ctx, v=v.tolist(), got=p.tolist(), oracle=o.tolist()))


def _check_kl_step(rep, mdp, rho, g, ctx):
    A = mdp.num_actions
    for _ in range(5):
        p = g.dirichlet(np.ones(A))
        q = g.random(A) / (1 - mdp.gamma)
        eta = float(g.choice([0.01, 0.5, 3.0]))
        got = simplex.mirror_step("kl", p, q, eta)
        want = kl_step_oracle(p, q, eta)
        err = float(np.max(np.abs(got - want)))
        rep.n_cases += 1
        if err > 1e-12:
            rep.fail(err, dict(ctx, p=p.tolist(), q=q.tolist(), eta=eta, got=got.tolist(), oracle=want.tolist()))


def _check_three_point(rep, mdp, rho, g, ctx):
    A = mdp.num_actions
    for kind in ("euclidean", "kl"):
        for _ in range(3):
            p = g.dirichlet(np.ones(A))
            q = g.random(A)
            u = g.dirichlet(np.ones(A))
            eta = float(g.choice([0.1, 1.0, 10.0]))
            r = simplex.three_point_residual(kind, p, q, eta, u)
            rep.n_cases += 1
            if r > 1e-10:
                rep.fail(r, dict(ctx, kind=kind, p=p.tolist(), q=q.tolist(), u=u.tolist(), eta=eta, residual=r))


def _check_solvers(rep, mdp, rho, g, ctx):
    _, v_star, _ = policy_iteration(mdp)
    vi = value_iteration_oracle(mdp, 1e-10)
    err = float(np.max(np.abs(vi - v_star)))
    rep.n_cases += 1
    if err > 1e-9:
        rep.fail(err, dict(ctx, route="value_iteration", error=err))
    if mdp.num_actions ** mdp.num_states <= 1024:
        e = float(np.max(np.abs(enumerate_optimal_values(mdp) - v_star)))
        rep.n_cases += 1
        if e > 1e-9:
            rep.fail(e, dict(ctx, route="enumeration", error=e))


def _trace_checks(rep, trace, names, ctx):
    rep.n_cases += 1
    for v in trace.violations:
        if v["check"] in names:
            rep.fail(v["measured"] - v["bound"], dict(ctx, config=trace.config, **v))
            return


def _pmd_runs(mdp, rho, ref, steps):
    out = []
    for kind in ("euclidean", "kl"):
        for sched in ("constant", "geometric"):
            tr = pmd_run(mdp, rho, kind, sched, steps, reference=ref)
            out.append(((kind, sched), tr))
    return out


def _instance_context(spec, mdp, rho):
    return {"instance_spec": spec.to_dict(), "instance": to_document(mdp, rho=rho)}


def verify_suite(scope="quick", seed=0, out_dir=None, progress=None):
    """Run the battery; returns a :class:`SuiteReport`.

    The first counterexample of each failing check is written to
    ``out_dir/counterexample-<check>.json`` when ``out_dir`` is given.
    """
    if scope not in SCOPES:
        raise ValueError(f"scope must be one of {sorted(SCOPES)}")
    t0 = time.perf_counter()
    _, _, _, pmd_steps, ppg_steps = SCOPES[scope]
    names = [
        "performance_difference", "gradient", "projection", "kl_step", "three_point",
        "solvers", "pmd_descent", "pmd_bounds", "inexact_bounds", "ppg",
    ]
    if scope == "full":
        names.append("sampling")
    report = SuiteReport(scope, seed, {n: CheckReport(n) for n in names})
    c = report.checks
    for i, (spec, mdp, rho, g) in enumerate(_battery(scope, seed)):
        ctx = dict(_instance_context(spec, mdp, rho), instance_index=i)
        _check_pdl(c["performance_difference"], mdp, rho, g, ctx)
        _check_gradient(c["gradient"], mdp, rho, g, ctx)
        _check_projection(c["projection"], mdp, rho, g, ctx)
        _check_kl_step(c["kl_step"], mdp, rho, g, ctx)
        _check_three_point(c["three_point"], mdp, rho, g, ctx)
        _check_solvers(c["solvers"], mdp, rho, g, ctx)
        ref = optimal_reference(mdp, rho)
        for (kind, sched), tr in _pmd_runs(mdp, rho, ref, pmd_steps):
            rctx = dict(ctx, geometry=kind, schedule=sched)
            _trace_checks(c["pmd_descent"], tr, {"q_descent", "monotone"}, rctx)
            _trace_checks(
                c["pmd_bounds"], tr,
                {"pmd_sublinear", "pmd_linear", "master_recursion", "theta_bound"}, rctx,
            )
        for tau in (1e-3, 1e-2):
            tr = inexact_pmd_run(mdp, InjectedNoise(tau, seed + i), rho, "kl", "geometric",
                                 pmd_steps // 2, reference=ref)
            _trace_checks(c["inexact_bounds"], tr, {"inexact", "inexact_increase", "assumption_tau"},
                          dict(ctx, tau=tau))
        tr = ppg_run(mdp, rho, rho, ppg_steps, reference=ref)
        _trace_checks(c["ppg"], tr, {"ppg_descent", "gap_vs_mapping", "ppg_thm1", "weak_dom"}, ctx)
        if scope == "full" and mdp.num_states * mdp.num_actions <= 12:
            _check_sampling(c["sampling"], mdp, rho, ref, seed + i, ctx)
        if progress is not None:
            progress(i, report)
    report.elapsed = time.perf_counter() - t0
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for rep in report.checks.values():
            if rep.counterexample is not None:
                path = os.path.join(out_dir, f"counterexample-{rep.name}.json")
                doc = {"check": rep.name, **rep.counterexample}
                with open(path, "w") as fh:
                    json.dump(doc, fh, indent=1, default=_json_default)
                rep.counterexample_path = path
    return report


def _check_sampling(rep, mdp, rho, ref, seed, ctx):
    """Rollout estimates stay within the bias window plus a Hoeffding radius."""
    H = 20
    M = 2000
    pi = np.full((mdp.num_states, mdp.num_actions), 1.0 / mdp.num_actions)
    Q = _q(mdp, _value(mdp, pi))
    Qh = estimate_q_table(mdp, pi, H, M, seed)
    bias = mdp.gamma**H / (1 - mdp.gamma)
    # two-sided Hoeffding radius at failure probability 1e-9 per entry
    radius = math.sqrt(math.log(2e9) / (2 * M)) / (1 - mdp.gamma)
    err = Qh - Q
    rep.n_cases += 1
    worst = float(max(np.max(err) - radius, np.max(-err - bias - radius)))
    if worst > 0:
        rep.fail(worst, dict(ctx, H=H, M=M, estimate=Qh.tolist(), exact=Q.tolist()))
    if 0 < mdp.gamma < 1 and math.isfinite(ref.theta_rho):
        # plan formulas evaluated twice: closed form here, logarithmic route in plan_sampling
        try:
            plan = plan_sampling(mdp.gamma, ref.theta_rho, 0.5, 0.1, mdp.num_states * mdp.num_actions)
        except OverflowError:
            return
        one_m = 1 - mdp.gamma
        K = math.ceil(ref.theta_rho * math.log(4 / (one_m * 0.5)))
        Hh = math.ceil(math.log(16 * ref.theta_rho / (one_m**2 * 0.5)) / one_m)
        rep.n_cases += 1
        if (K, Hh) != (plan.K, plan.H) or plan.bound() > 0.5 + 1e-12:
            rep.fail(1.0, dict(ctx, plan=plan.to_dict(), K=K, H=Hh))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")
