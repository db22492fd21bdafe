"""Closed-form convergence envelopes.

All evaluators are pure functions of the constants they name.  A missing
constant raises ``ValueError`` rather than silently producing a vacuous bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional


def _need(**kw):
    missing = [k for k, v in kw.items() if v is None]
    if missing:
        raise ValueError("missing constants: " + ", ".join(missing))


def _contraction(theta_rho):
    return 1.0 - 1.0 / theta_rho


@dataclass(frozen=True)
class SmoothnessParams:
    lipschitz_L: float
    omega: float


def smoothness(gamma, num_states, num_actions, c_star):
    """``L = 2 gamma |A| / (1-gamma)^3`` and ``omega = (1-gamma)^2 / (16 |S| C*^2)``."""
    L = 2.0 * gamma * num_actions / (1.0 - gamma) ** 3
    if c_star is None or not math.isfinite(c_star) or c_star <= 0:
        omega = 0.0
    else:
        omega = (1.0 - gamma) ** 2 / (16.0 * num_states * c_star**2)
    return SmoothnessParams(L, omega)


def ppg_thm1(k, num_states, num_actions, gamma, c_star):
    """``128 |S||A| C*^2 / (k (1-gamma)^5)`` for ``k >= 1``."""
    _need(c_star=c_star)
    if k < 1:
        return math.inf
    return 128.0 * num_states * num_actions * c_star**2 / (k * (1.0 - gamma) ** 5)


def weak_dom(k, L, omega, delta0):
    """``max{4L/(omega k), (sqrt(2)/2)^k delta_0}``."""
    _need(L=L, omega=omega, delta0=delta0)
    if k < 1 or omega <= 0:
        return math.inf
    return max(4.0 * L / (omega * k), (math.sqrt(2.0) / 2.0) ** k * delta0)


def pmd_sublinear(k, dstar0, eta, gamma):
    """``(D*_0/(eta(1-gamma)) + 1/(1-gamma)^2) / (k+1)`` for a constant step."""
    _need(dstar0=dstar0, eta=eta)
    return (dstar0 / (eta * (1.0 - gamma)) + 1.0 / (1.0 - gamma) ** 2) / (k + 1)


def pmd_linear(k, theta_rho, delta0, dstar0, eta0, gamma):
    """``(1 - 1/theta)^k (delta_0 + D*_0/(eta_0 gamma))``."""
    _need(theta_rho=theta_rho, delta0=delta0, dstar0=dstar0, eta0=eta0)
    return _contraction(theta_rho) ** k * (delta0 + dstar0 / (eta0 * gamma))


def pmd_linear_simple(k, theta_rho, gamma):
    """``(1 - 1/theta)^k 2/(1-gamma)``; valid when ``eta_0 >= (1-gamma) D*_0 / gamma``."""
    _need(theta_rho=theta_rho)
    return _contraction(theta_rho) ** k * 2.0 / (1.0 - gamma)


def inexact_floor(theta_rho, gamma, tau):
    return 4.0 * theta_rho * tau / (1.0 - gamma)


def inexact(k, theta_rho, gamma, tau, delta0=None, dstar0=None, eta0=None):
    """Linear term plus ``4 theta tau / (1-gamma)``.

    With ``delta0``, ``dstar0`` and ``eta0`` the general linear term is used,
    otherwise the simplified ``2/(1-gamma)`` form.
    """
    _need(theta_rho=theta_rho, tau=tau)
    if delta0 is not None and dstar0 is not None and eta0 is not None:
        head = pmd_linear(k, theta_rho, delta0, dstar0, eta0, gamma)
    else:
        head = pmd_linear_simple(k, theta_rho, gamma)
    return head + inexact_floor(theta_rho, gamma, tau)


def sampled(K, H, theta_rho, gamma):
    """``(1-1/theta)^K 2/(1-gamma) + 8 theta gamma^H / (1-gamma)^2``."""
    _need(theta_rho=theta_rho)
    return pmd_linear_simple(K, theta_rho, gamma) + 8.0 * theta_rho * gamma**H / (1.0 - gamma) ** 2


@dataclass(frozen=True)
class BoundContext:
    """Constants a run knows about; any of them may be absent."""

    gamma: float
    num_states: int
    num_actions: int
    c_star: Optional[float] = None
    theta_rho: Optional[float] = None
    delta0: Optional[float] = None
    dstar0: Optional[float] = None
    eta: Optional[float] = None
    eta0: Optional[float] = None
    L: Optional[float] = None
    omega: Optional[float] = None
    tau: Optional[float] = None
    horizon: Optional[int] = None


def theoretical_bounds(ctx):
    """Map each bound whose constants are present in ``ctx`` to a ``k -> value`` callable."""
    g = ctx.gamma
    out = {}
    if ctx.c_star is not None:
        out["ppg_thm1"] = lambda k: ppg_thm1(k, ctx.num_states, ctx.num_actions, g, ctx.c_star)
    if None not in (ctx.L, ctx.omega, ctx.delta0):
        out["weak_dom"] = lambda k: weak_dom(k, ctx.L, ctx.omega, ctx.delta0)
    if None not in (ctx.dstar0, ctx.eta):
        out["pmd_sublinear"] = lambda k: pmd_sublinear(k, ctx.dstar0, ctx.eta, g)
    if None not in (ctx.theta_rho, ctx.delta0, ctx.dstar0, ctx.eta0) and g > 0:
        out["pmd_linear"] = lambda k: pmd_linear(
            k, ctx.theta_rho, ctx.delta0, ctx.dstar0, ctx.eta0, g
        )
    if None not in (ctx.theta_rho, ctx.tau) and g > 0:
        out["inexact"] = lambda k: inexact(
            k, ctx.theta_rho, g, ctx.tau, ctx.delta0, ctx.dstar0, ctx.eta0
        )
    if None not in (ctx.theta_rho, ctx.horizon):
        out["sampled"] = lambda K: sampled(K, ctx.horizon, ctx.theta_rho, g)
    return out


def strong_dominance_check(gaps, post_gaps, grad_norms, L, mu_hat, slack=1e-9):
    """Diagnostic for the strong gradient-mapping dominance condition.

    ``gaps[k] = F(x^k) - F*``, ``post_gaps[k] = F(T_L(x^k)) - F*`` and
    ``grad_norms[k] = ||G_L(x^k)||``.  The geometric recursion
    ``gaps[k] <= (1 + mu/L)^-k gaps[0]`` is checked only when the condition
    ``||G||^2 / 2 >= mu (F(T_L(x)) - F*)`` held at every visited iterate.

    Returns ``(condition_held, recursion_ok)``; ``recursion_ok`` is ``None`` when
    the condition failed somewhere.
    """
    held = all(
        0.5 * g * g >= mu_hat * p - slack for g, p in zip(grad_norms, post_gaps)
    )
    if not held:
        return False, None
    factor = 1.0 + mu_hat / L
    ok = all(gaps[k] <= factor ** (-k) * gaps[0] + slack for k in range(len(gaps)))
    return True, ok
