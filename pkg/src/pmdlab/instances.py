"""Seeded instance generators and the on-disk MDP format.

File format (JSON text, ``format_version`` 1)::

    {
      "format_version": 1,
      "num_states": S, "num_actions": A, "gamma": g,
      "convention": "regret" | "reward",
      "transition": [[[P(s'|s,a) for s'] for a] for s],
      "reward": [[R(s,a) for a] for s],
      "rho": [...],   # optional
      "mu": [...]     # optional
    }

With ``"convention": "reward"`` the stored matrix is a reward and is turned into
a regret ``1 - R`` on load.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import rng
from ._config import get_tolerances
from .exceptions import ValidationError
from .mdp import Dmdp

FORMAT_VERSION = 1
CONVENTIONS = ("regret", "reward")


@dataclass(frozen=True)
class InstanceSpec:
    """Recipe for :func:`generate`.

    ``kind`` selects which size fields are used: ``random`` uses ``num_states``,
    ``num_actions`` and ``dirichlet_alpha``; ``chain`` uses ``length``;
    ``gridworld`` uses ``width``, ``height`` and ``slip_prob``.
    """

    kind: str = "random"
    gamma: float = 0.9
    seed: int = 0
    num_states: int = 5
    num_actions: int = 3
    dirichlet_alpha: float = 1.0
    length: int = 5
    width: int = 3
    height: int = 3
    slip_prob: float = 0.1

    def __post_init__(self):
        if self.kind not in ("random", "chain", "gridworld"):
            raise ValidationError(f"unknown instance kind {self.kind!r}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError("gamma must lie in [0, 1)")
        if self.kind == "random" and (
            self.num_states < 1 or self.num_actions < 1 or not self.dirichlet_alpha > 0
        ):
            raise ValidationError("random instances need S, A >= 1 and alpha > 0")
        if self.kind == "chain" and self.length < 1:
            raise ValidationError("chain length must be >= 1")
        if self.kind == "gridworld" and (
            self.width < 1 or self.height < 1 or not 0.0 <= self.slip_prob < 1.0
        ):
            raise ValidationError("gridworld needs width, height >= 1 and slip in [0, 1)")

    def to_dict(self):
        return asdict(self)


def _random(spec):
    g = rng.stream(spec.seed, rng.INSTANCE)
    S, A = spec.num_states, spec.num_actions
    draws = g.gamma(spec.dirichlet_alpha, size=(S, A, S))
    sums = draws.sum(axis=2, keepdims=True)
    # tiny alpha can underflow a whole row; fall back to a self-loop
    dead = sums[..., 0] == 0
    if np.any(dead):
        for s, a in zip(*np.nonzero(dead)):
            draws[s, a, s] = 1.0
        sums = draws.sum(axis=2, keepdims=True)
    P = draws / sums
    R = g.random((S, A))
    return Dmdp(P, R, spec.gamma)


def _chain(spec):
    n = spec.length
    P = np.zeros((n, 2, n))
    for s in range(n):
        P[s, 0, max(s - 1, 0)] = 1.0  # left
        P[s, 1, min(s + 1, n - 1)] = 1.0  # right
    R = np.ones((n, 2))
    R[n - 1, :] = 0.0
    return Dmdp(P, R, spec.gamma)


_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right
_LATERAL = {0: (2, 3), 1: (2, 3), 2: (0, 1), 3: (0, 1)}


def _gridworld(spec):
    W, H = spec.width, spec.height
    n = W * H
    goal = n - 1
    P = np.zeros((n, 4, n))

    def target(s, move):
        r, c = divmod(s, W)
        dr, dc = _MOVES[move]
        r2, c2 = r + dr, c + dc
        if 0 <= r2 < H and 0 <= c2 < W:
            return r2 * W + c2
        return s

    for s in range(n):
        for a in range(4):
            P[s, a, target(s, a)] += 1.0 - spec.slip_prob
            for lat in _LATERAL[a]:
                P[s, a, target(s, lat)] += spec.slip_prob / 2.0
    R = np.ones((n, 4))
    R[goal, :] = 0.0
    return Dmdp(P, R, spec.gamma)


def generate(spec):
    """Build the MDP described by ``spec``; identical specs give identical MDPs."""
    if spec.kind == "random":
        return _random(spec)
    if spec.kind == "chain":
        return _chain(spec)
    return _gridworld(spec)


def validate(mdp, rho=None, mu=None):
    """List every violated invariant of ``mdp`` (and of ``rho``/``mu`` when given)."""
    tol = get_tolerances()
    out = []
    P, R = mdp.transition, mdp.reward
    if not (0.0 <= mdp.gamma < 1.0) or not math.isfinite(mdp.gamma):
        out.append(f"gamma {mdp.gamma!r} outside [0, 1)")
    if not np.all(np.isfinite(P)):
        out.append("transition has non-finite entries")
    for s, a, t in zip(*np.nonzero(P < 0)):
        out.append(f"negative probability transition[{s}][{a}][{t}] = {P[s, a, t]!r}")
    sums = P.sum(axis=2)
    for s, a in zip(*np.nonzero(np.abs(sums - 1.0) > tol.row_sum)):
        out.append(f"row-sum violation at (s={s}, a={a}): sums to {sums[s, a]!r}")
    if not np.all(np.isfinite(R)):
        out.append("reward has non-finite entries")
    for s, a in zip(*np.nonzero((R < 0) | (R > 1))):
        out.append(f"reward[{s}][{a}] = {R[s, a]!r} outside [0, 1]")
    for name, d in (("rho", rho), ("mu", mu)):
        if d is None:
            continue
        d = np.asarray(d, dtype=float)
        if d.shape != (mdp.num_states,):
            out.append(f"{name} has shape {d.shape}, expected ({mdp.num_states},)")
            continue
        if np.any(d < 0):
            out.append(f"{name} has negative entries")
        if abs(d.sum() - 1.0) > tol.distribution_sum:
            out.append(f"{name} sums to {d.sum()!r}, not 1")
    return out


class LoadedInstance(NamedTuple):
    mdp: Dmdp
    rho: Optional[np.ndarray]
    mu: Optional[np.ndarray]


def to_document(mdp, rho=None, mu=None, convention="regret"):
    if convention not in CONVENTIONS:
        raise ValidationError(f"convention must be one of {CONVENTIONS}")
    R = mdp.reward if convention == "regret" else 1.0 - mdp.reward
    doc = {
        "format_version": FORMAT_VERSION,
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "gamma": mdp.gamma,
        "convention": convention,
        "transition": mdp.transition.tolist(),
        "reward": R.tolist(),
    }
    if rho is not None:
        doc["rho"] = np.asarray(rho, dtype=float).tolist()
    if mu is not None:
        doc["mu"] = np.asarray(mu, dtype=float).tolist()
    return doc


def save(mdp, path, rho=None, mu=None, convention="regret"):
    """Write ``mdp`` as JSON.  Floats use the shortest round-tripping repr."""
    doc = to_document(mdp, rho, mu, convention)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    return path


def _field(doc, name, path):
    if name not in doc:
        raise ValidationError(f"{path}: missing field {name!r}")
    return doc[name]


def _array(doc, name, shape, path):
    try:
        arr = np.array(_field(doc, name, path), dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: field {name!r} is not a numeric array ({exc})") from None
    if arr.shape != shape:
        raise ValidationError(f"{path}: field {name!r} has shape {arr.shape}, expected {shape}")
    return arr


def from_document(doc, path="<document>"):
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: top level must be an object")
    version = _field(doc, "format_version", path)
    if version != FORMAT_VERSION:
        raise ValidationError(f"{path}: field 'format_version' is {version!r}, expected 1")
    S = _field(doc, "num_states", path)
    A = _field(doc, "num_actions", path)
    if not (isinstance(S, int) and isinstance(A, int) and S >= 1 and A >= 1):
        raise ValidationError(f"{path}: fields 'num_states'/'num_actions' must be positive integers")
    gamma = _field(doc, "gamma", path)
    if not isinstance(gamma, (int, float)):
        raise ValidationError(f"{path}: field 'gamma' must be a number")
    convention = doc.get("convention", "regret")
    if convention not in CONVENTIONS:
        raise ValidationError(f"{path}: field 'convention' must be 'regret' or 'reward'")
    P = _array(doc, "transition", (S, A, S), path)
    R = _array(doc, "reward", (S, A), path)
    if convention == "reward":
        R = 1.0 - R
    rho = _array(doc, "rho", (S,), path) if "rho" in doc else None
    mu = _array(doc, "mu", (S,), path) if "mu" in doc else None
    return LoadedInstance(Dmdp(P, R, float(gamma)), rho, mu)


def load(path):
    """Read an instance file; validity problems are left for :func:`validate`."""
    path = os.fspath(path)
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return from_document(doc, path)
