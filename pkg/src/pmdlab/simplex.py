"""Per-state mirror steps on the probability simplex."""

from __future__ import annotations

import enum

import numpy as np

from .exceptions import ValidationError

TINY = np.finfo(float).tiny  # smallest positive normal double


class BregmanKind(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    KL = "kl"


def as_kind(kind):
    try:
        return BregmanKind(kind)
    except ValueError:
        raise ValidationError(f"unknown divergence {kind!r}; use 'euclidean' or 'kl'") from None


def _simplex_threshold(w):
    # sort-and-threshold: largest j with u_j > (sum_{i<=j} u_i - 1) / j
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    r = np.nonzero(u - (css - 1.0) / j > 0)[0][-1]
    return (css[r] - 1.0) / (r + 1)


def project_simplex(v):
    """Euclidean projection of ``v`` onto the probability simplex.

    The input is shifted by its maximum first; the projection is equivariant to
    uniform shifts, and the shift keeps the active entries exact when ``v`` has
    very large magnitude (huge step sizes).
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError("project_simplex expects a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise ValidationError("project_simplex input must be finite")
    w = v - v.max()
    return np.maximum(w - _simplex_threshold(w), 0.0)


def _kl_logits(log_p, q, eta):
    return log_p - eta * q


def _kl_step(p, q, eta):
    if np.any(p <= 0):
        raise ValidationError("KL mirror step needs a strictly positive starting point")
    z = _kl_logits(np.log(p), q, eta)
    z = z - z.max()
    z = z - np.log(np.exp(z).sum())
    out = np.exp(z)
    low = out < TINY
    n_floor = int(low.sum())
    if n_floor:
        out[low] = TINY
        out /= out.sum()
    return out, n_floor


def _step(kind, p, q, eta):
    if eta < 0:
        raise ValidationError("step size must be non-negative")
    if kind is BregmanKind.EUCLIDEAN:
        return project_simplex(p - eta * q), 0
    return _kl_step(p, q, eta)


def mirror_step(kind, pi_s, q_s, eta):
    """``argmin_p eta <q_s, p> + D(p, pi_s)`` over the simplex.

    Euclidean: projected step.  KL: multiplicative weights computed in log space;
    entries that underflow are floored at the smallest positive normal double
    (see :func:`mirror_update` for the floor count).
    """
    kind = as_kind(kind)
    p, _ = _step(kind, np.asarray(pi_s, dtype=float), np.asarray(q_s, dtype=float), float(eta))
    return p


def mirror_update(kind, pi, Q, eta):
    """Apply :func:`mirror_step` to every row; returns ``(new_pi, floor_events)``."""
    kind = as_kind(kind)
    pi = np.asarray(pi, dtype=float)
    Q = np.asarray(Q, dtype=float)
    out = np.empty_like(pi)
    floors = 0
    for s in range(pi.shape[0]):
        out[s], n = _step(kind, pi[s], Q[s], float(eta))
        floors += n
    return out, floors


def bregman_divergence(kind, p, p_prime):
    """``D(p, p')``: half squared distance or KL (``0 log 0 = 0``; ``inf`` off-support)."""
    kind = as_kind(kind)
    p = np.asarray(p, dtype=float)
    p_prime = np.asarray(p_prime, dtype=float)
    if kind is BregmanKind.EUCLIDEAN:
        return 0.5 * float(np.sum((p - p_prime) ** 2))
    pos = p > 0
    if np.any(p_prime[pos] <= 0):
        return float("inf")
    return max(float(np.sum(p[pos] * np.log(p[pos] / p_prime[pos]))), 0.0)


def weighted_divergence(kind, pi, pi_prime, w):
    """``sum_s w_s D(pi_s, pi'_s)``; zero-weight states are skipped."""
    w = np.asarray(w, dtype=float)
    total = 0.0
    for s in np.nonzero(w > 0)[0]:
        total += w[s] * bregman_divergence(kind, pi[s], pi_prime[s])
    return float(total)


def three_point_residual(kind, pi_s, q_s, eta, u):
    """``lhs - rhs`` of the three-point inequality at comparison point ``u``.

    ``lhs = eta <q, p+> + D(p+, pi_s)``, ``rhs = eta <q, u> + D(u, pi_s) - D(u, p+)``
    where ``p+`` is :func:`mirror_step`; non-positive up to round-off.
    """
    p = mirror_step(kind, pi_s, q_s, eta)
    lhs = eta * float(np.dot(q_s, p)) + bregman_divergence(kind, p, pi_s)
    rhs = (
        eta * float(np.dot(q_s, u))
        + bregman_divergence(kind, u, pi_s)
        - bregman_divergence(kind, u, p)
    )
    return lhs - rhs
