"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 bound violation,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .exceptions import PlanOverflowError, ValidationError
from .instances import InstanceSpec, generate, load, save, validate
from .optimizers import pmd_run, ppg_run
from .ratefit import rate_fit
from .sampling import InjectedNoise, RolloutOracle, inexact_pmd_run, plan_sampling
from .schedules import StepSchedule
from .solvers import optimal_reference, policy_iteration, stationary_distribution
from .validation import check_distribution, uniform_distribution
from .verify import MUTATIONS, mutated, verify_suite

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BOUND = 3
EXIT_VERIFY = 4


class ConfigError(Exception):
    pass


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, default=_json_default)
        fh.write("\n")


def _add_instance_args(p, required_file=False):
    p.add_argument("--instance", help="instance file (JSON); overrides the generator flags")
    g = p.add_argument_group("generator")
    g.add_argument("--kind", default="random", choices=["random", "chain", "gridworld"])
    g.add_argument("--num-states", type=int, default=5)
    g.add_argument("--num-actions", type=int, default=3)
    g.add_argument("--gamma", type=float, default=0.9)
    g.add_argument("--dirichlet-alpha", type=float, default=1.0)
    g.add_argument("--length", type=int, default=5)
    g.add_argument("--width", type=int, default=3)
    g.add_argument("--height", type=int, default=3)
    g.add_argument("--slip-prob", type=float, default=0.1)
    g.add_argument("--instance-seed", type=int, default=None,
                   help="generator seed (defaults to --seed)")


def _instance_spec(args):
    seed = args.seed if args.instance_seed is None else args.instance_seed
    return InstanceSpec(
        kind=args.kind, gamma=args.gamma, seed=seed, num_states=args.num_states,
        num_actions=args.num_actions, dirichlet_alpha=args.dirichlet_alpha,
        length=args.length, width=args.width, height=args.height, slip_prob=args.slip_prob,
    )


def _load_instance(args):
    if args.instance:
        try:
            inst = load(args.instance)
        except OSError as exc:
            raise ConfigError(f"cannot read instance: {exc}") from None
        problems = validate(inst.mdp, inst.rho, inst.mu)
        if problems:
            raise ConfigError(f"{args.instance}: " + "; ".join(problems))
        return inst.mdp, inst.rho, inst.mu, {"instance_file": os.path.abspath(args.instance)}
    spec = _instance_spec(args)
    return generate(spec), None, None, {"instance_spec": spec.to_dict()}


def _distribution(choice, mdp, from_file, name):
    S = mdp.num_states
    if choice == "uniform":
        return uniform_distribution(S)
    if choice == "from-file":
        if from_file is None:
            raise ConfigError(f"--{name} from-file needs an instance file carrying {name!r}")
        return check_distribution(from_file, S, name)
    if choice == "rho-star":
        pi_star, _, _ = policy_iteration(mdp)
        return stationary_distribution(mdp, pi_star)
    raise ConfigError(f"unknown {name} selection {choice!r}")


def _out_dir(args):
    os.makedirs(args.out_dir, exist_ok=True)
    return args.out_dir


# ---------------------------------------------------------------- subcommands

def cmd_generate(args):
    spec = _instance_spec(args)
    mdp = generate(spec)
    path = args.out or os.path.join(_out_dir(args), "instance.json")
    rho = uniform_distribution(mdp.num_states) if args.with_uniform_rho else None
    save(mdp, path, rho=rho, mu=rho)
    print(path)
    return EXIT_OK


def cmd_solve(args):
    mdp, rho_f, _, source = _load_instance(args)
    rho = _distribution(args.rho, mdp, rho_f, "rho")
    ref = optimal_reference(mdp, rho)
    doc = dict(source)
    doc.update(
        gamma=mdp.gamma,
        rho=rho,
        pi_star=ref.pi_star,
        greedy_actions=np.argmax(ref.pi_star, axis=1),
        v_star=ref.v_star,
        v_star_rho=ref.v_star_rho,
        d_rho_star=ref.d_rho_star,
        c_star_rho=ref.c_star_rho,
        theta_rho=ref.theta_rho,
        policy_iterations=ref.pi_iterations,
    )
    _write_json(os.path.join(_out_dir(args), "summary.json"), doc)
    print(json.dumps({k: doc[k] for k in ("v_star_rho", "c_star_rho", "theta_rho")},
                     default=_json_default))
    return EXIT_OK


def _oracle(args, mdp):
    if args.oracle == "noise":
        return InjectedNoise(args.tau, args.seed)
    if args.horizon is None or args.batch is None:
        raise ConfigError("--oracle rollout needs --horizon and --batch")
    return RolloutOracle(args.horizon, args.batch, args.seed, args.sampling_mode, args.threads,
                         mdp.gamma)


def cmd_run(args):
    mdp, rho_f, mu_f, source = _load_instance(args)
    rho = _distribution(args.rho, mdp, rho_f, "rho")
    mu = _distribution(args.mu, mdp, mu_f, "mu") if args.mu else rho
    common = dict(steps=args.steps, blind=args.blind, tol=args.tol)
    if args.algorithm == "ppg":
        trace = ppg_run(mdp, mu=mu, rho=rho, eta=args.eta, **common)
    else:
        schedule = StepSchedule(args.schedule, args.eta, args.ratio)
        kw = dict(rho=rho, kind=args.geometry, schedule=schedule, **common)
        if args.algorithm == "pmd":
            trace = pmd_run(mdp, **kw)
        else:
            trace = inexact_pmd_run(mdp, _oracle(args, mdp), **kw)
    out = _out_dir(args)
    trace.to_csv(os.path.join(out, "trace.csv"))
    summary = trace.summary()
    summary.update(source)
    summary["master_seed"] = args.seed
    summary["threads"] = args.threads
    if trace.reference is not None:
        summary.update(theta_rho=trace.reference.theta_rho, c_star_rho=trace.reference.c_star_rho)
    _write_json(os.path.join(out, "summary.json"), summary)
    last = trace.records[-1]
    print(f"status={trace.status} k={last.k} v_rho={last.v_rho!r} delta={last.delta_k!r} "
          f"violations={len(trace.violations)}")
    return EXIT_BOUND if trace.violations else EXIT_OK


def _read_gaps(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "delta_k" not in rows[0]:
        raise ConfigError(f"{path}: not a trace file (no delta_k column)")
    return [float(r["delta_k"]) if r["delta_k"] else math.nan for r in rows]


def cmd_rate_fit(args):
    gaps = _read_gaps(args.trace)
    theta = args.theta_rho
    schedule = args.schedule
    summary_path = args.summary or os.path.join(os.path.dirname(args.trace), "summary.json")
    if os.path.exists(summary_path):
        with open(summary_path) as fh:
            summary = json.load(fh)
        theta = summary.get("theta_rho") if theta is None else theta
        schedule = schedule or summary.get("config", {}).get("schedule")
    fit = rate_fit(gaps, theta, args.burn_in)
    doc = fit.to_dict()
    doc["schedule"] = schedule
    asserted = schedule in ("geometric", "theta_ratio") and fit.within_theory is not None
    doc["asserted"] = asserted
    print(json.dumps(doc))
    if args.out_dir:
        _write_json(os.path.join(_out_dir(args), "rate_fit.json"), doc)
    if asserted and not fit.within_theory:
        return EXIT_BOUND
    return EXIT_OK


def cmd_verify(args):
    out = args.out_dir
    if args.mutation:
        with mutated(args.mutation):
            report = verify_suite(args.scope, args.seed, out)
    else:
        report = verify_suite(args.scope, args.seed, out)
    for c in report.checks.values():
        line = f"{'PASS' if c.passed else 'FAIL'} {c.name} cases={c.n_cases}"
        if c.counterexample_path:
            line += f" counterexample={c.counterexample_path}"
        print(line)
    print(f"{'PASS' if report.passed else 'FAIL'} verify scope={report.scope} "
          f"elapsed={report.elapsed:.1f}s")
    if out:
        os.makedirs(out, exist_ok=True)
        _write_json(os.path.join(out, "verify.json"), report.to_dict())
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_plan(args):
    try:
        plan = plan_sampling(args.gamma, args.theta_rho, args.eps, args.delta, args.num_sa)
    except PlanOverflowError as exc:
        raise ConfigError(str(exc)) from None
    print(json.dumps(plan.to_dict()))
    if args.out_dir:
        _write_json(os.path.join(_out_dir(args), "plan.json"), plan.to_dict())
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    parser = argparse.ArgumentParser(
        prog="pmdlab", description="Policy gradient and policy mirror descent on tabular MDPs."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default="."):
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--threads", type=int, default=1, help="worker cap for rollouts")
        p.add_argument("--out-dir", default=out_default)

    p = sub.add_parser("generate", help="write a seeded instance file")
    _add_instance_args(p)
    common(p)
    p.add_argument("--out", help="output path (default OUT_DIR/instance.json)")
    p.add_argument("--with-uniform-rho", action="store_true",
                   help="store uniform rho and mu in the file")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="policy iteration and mismatch constants")
    _add_instance_args(p)
    common(p)
    p.add_argument("--rho", default="uniform", choices=["uniform", "from-file", "rho-star"])
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("run", help="run PPG, PMD or inexact PMD and write trace.csv/summary.json")
    _add_instance_args(p)
    common(p)
    p.add_argument("--algorithm", default="pmd", choices=["ppg", "pmd", "inexact-pmd"])
    p.add_argument("--geometry", default="kl", choices=["kl", "euclidean"])
    p.add_argument("--schedule", default="geometric", choices=["constant", "geometric", "theta_ratio"])
    p.add_argument("--eta", type=float, default=None, help="step size (or initial step size)")
    p.add_argument("--ratio", type=float, default=None, help="geometric growth factor")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--rho", default="uniform", choices=["uniform", "from-file", "rho-star"])
    p.add_argument("--mu", default=None, choices=["uniform", "from-file", "rho-star"],
                   help="PPG start distribution (default: same as rho)")
    p.add_argument("--oracle", default="noise", choices=["noise", "rollout"])
    p.add_argument("--tau", type=float, default=0.0, help="injected noise level")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--sampling-mode", default="auto", choices=["auto", "trajectory", "aggregate"])
    p.add_argument("--tol", type=float, default=None, help="stop once delta_k <= tol")
    p.add_argument("--blind", action="store_true", help="skip the optimal-policy reference")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("rate-fit", help="fit the contraction factor of a trace")
    p.add_argument("trace", help="trace.csv from `pmdlab run`")
    p.add_argument("--theta-rho", type=float, default=None)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--schedule", default=None, choices=["constant", "geometric", "theta_ratio"])
    p.add_argument("--summary", default=None, help="summary.json (default: next to the trace)")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_rate_fit)

    p = sub.add_parser("verify", help="run the self-verification battery")
    p.add_argument("--scope", default="quick", choices=["quick", "full"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--mutation", default=None, choices=sorted(MUTATIONS),
                   help="plant a known bug first (the battery should then fail)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plan", help="print the sampling plan (K, H, M)")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--theta-rho", type=float, required=True)
    p.add_argument("--num-sa", type=int, required=True, help="number of state-action pairs")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_plan)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationError) as exc:
        print(f"pmdlab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
