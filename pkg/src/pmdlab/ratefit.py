"""Empirical contraction rate of an optimality-gap sequence."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import ValidationError

# gaps at or below this are round-off and carry no rate information
GAP_FLOOR = 1e-13
MIN_POINTS = 10
RATE_SLACK = 0.05


@dataclass(frozen=True)
class RateFit:
    fitted_contraction: float
    theoretical_contraction: Optional[float]
    burn_in: int
    window: tuple
    n_points: int
    within_theory: Optional[bool]

    def to_dict(self):
        return {
            "fitted_contraction": self.fitted_contraction,
            "theoretical_contraction": self.theoretical_contraction,
            "burn_in": self.burn_in,
            "window": list(self.window),
            "n_points": self.n_points,
            "within_theory": self.within_theory,
        }


def rate_fit(gaps, theta_rho=None, burn_in=0, slack=RATE_SLACK):
    """Least-squares fit of ``log delta_k = a + k log c``.

    Parameters
    ----------
    gaps : sequence of float or RunTrace
        ``delta_k`` indexed by ``k``.  Points with ``delta_k <= 1e-13`` or
        ``k < burn_in`` are dropped; at least 10 must remain.
    theta_rho : float, optional
        When given, the fit is compared with ``1 - 1/theta_rho`` (plus ``slack``).
    """
    if hasattr(gaps, "deltas"):
        gaps = gaps.deltas
    d = np.asarray(gaps, dtype=float)
    k = np.arange(d.size)
    keep = (k >= burn_in) & np.isfinite(d) & (d > GAP_FLOOR)
    if keep.sum() < MIN_POINTS:
        raise ValidationError(
            f"rate fit needs {MIN_POINTS} gaps above {GAP_FLOOR} after burn-in, got {int(keep.sum())}"
        )
    slope, _ = np.polyfit(k[keep], np.log(d[keep]), 1)
    fitted = math.exp(slope)
    theory = None
    within = None
    if theta_rho is not None and math.isfinite(theta_rho):
        theory = 1.0 - 1.0 / theta_rho
        within = bool(fitted <= theory + slack)
    ks = k[keep]
    return RateFit(fitted, theory, int(burn_in), (int(ks[0]), int(ks[-1])), int(keep.sum()), within)
