"""Hyper-parameter and sampling-complexity advice from imperfectness estimates.

The sample-size figures are unit-constant scale factors of O(.) expressions:
order of magnitude only.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass


def beta_lambda(lam: float, n_g: int, n_g_prime: int) -> float:
    """Effective regularization weight ``lam n_g' / ((1-lam) n_g + lam n_g')``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if not 0 <= n_g_prime <= n_g:
        raise ValueError("need 0 <= n_g' <= n_g")
    denom = (1.0 - lam) * n_g + lam * n_g_prime
    if denom <= 0:
        raise ZeroDivisionError("beta_lambda undefined: zero denominator")
    return lam * n_g_prime / denom


@dataclass
class AdvisorDecision:
    epsilon: float
    Q_K: float
    Q_R_star: float
    case: str
    lam: float | None
    n_z_order: float | None
    n_g_order: float | None
    feasible: bool
    order_of_magnitude_only: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(num, den):
    return math.inf if den == 0 else num / den


def choose_lambda(epsilon: float, Q_K: float, Q_R_star: float) -> AdvisorDecision:
    """Pick lambda for a target population risk of ``sqrt(epsilon)``.

    (a) ``Q_K <= sqrt(eps)``: knowledge alone suffices, lambda = 1.
    (b) ``sqrt(eps)/Q_K + sqrt(eps)/Q_R* >= 1``: lambda = sqrt(eps)/Q_K.
    (c) otherwise no lambda reaches the target.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if Q_K < 0 or Q_R_star < 0:
        raise ValueError("imperfectness values must be nonnegative")
    root = math.sqrt(epsilon)
    if Q_K <= root:
        return AdvisorDecision(epsilon, Q_K, Q_R_star, "a", 1.0, 0.0,
                               1.0 / (epsilon ** 2 - epsilon ** 3), True)
    if _ratio(root, Q_K) + _ratio(root, Q_R_star) >= 1.0:
        n_z = (1.0 / epsilon - 1.0 / (root * Q_K)) ** 2
        n_g = 1.0 / ((epsilon - epsilon ** 2) * Q_K ** 2)
        return AdvisorDecision(epsilon, Q_K, Q_R_star, "b", root / Q_K, n_z, n_g, True)
    return AdvisorDecision(epsilon, Q_K, Q_R_star, "c", None, None, None, False)
