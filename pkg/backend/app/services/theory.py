"""Closed-form prediction curves and tail bounds.

All logarithms are natural.
"""

from __future__ import annotations

import math
from collections.abc import Iterable

from app.exceptions import InvalidConfigError
from app.models.experiment import Table
from app.models.theory import Prediction, Regime


def predict_moderate(n: int, d: int) -> Prediction:
    """Both sides near rank sqrt(d); about n*exp(-sqrt(d)) agents unmatched per side."""
    if d < 1:
        raise InvalidConfigError(f"d must be at least 1, got {d}")
    root = math.sqrt(d)
    quarter = d**0.25
    return Prediction(
        regime=Regime.MODERATE,
        r_men_pred=root,
        r_women_pred=root,
        delta_pred=n * math.exp(-root),
        band=d**0.3,
        delta_m_band_factor=math.exp(3 * quarter),
        delta_w_band_factor=math.exp(2.5 * quarter),
        r_men_range=(root - 6 * quarter, root + 6 * quarter),
        r_women_range=(root - 8 * quarter, root + 8 * quarter),
    )


def predict_dense(n: int, k: int, d: int) -> Prediction:
    """Short side (men, k < 0) near rank log n; long side near d / log n.

    ``delta_pred`` is the forced deficit max(-k, 0): with k >= 0 no woman has to
    stay single and the prediction is 0, the o(n) excess is not modelled.
    """
    if n < 2 or d < 2:
        raise InvalidConfigError(f"dense prediction needs n >= 2 and d >= 2, got n={n}, d={d}")
    log_n = math.log(n)
    men_upper = (1 + 2 * abs(k) / n + 2 / math.sqrt(log_n)) * log_n
    women_lower = (1 - 6 / n**0.125 - 6 * d / n) * d / log_n
    return Prediction(
        regime=Regime.DENSE,
        r_men_pred=log_n,
        r_women_pred=d / log_n,
        delta_pred=float(max(-k, 0)),
        r_men_range=(1.0, men_upper),
        r_women_range=(max(women_lower, 1.0), float(d + 1)),
    )


def predict_complete_akl(n: int, k: int, eps: float) -> Prediction:
    """Complete preference lists with men on the short side (-n/2 <= k <= -1)."""
    if k >= 0 or k < -n / 2:
        raise InvalidConfigError(f"complete-market bound needs -n/2 <= k <= -1, got k={k}")
    if eps <= 0:
        raise InvalidConfigError(f"eps must be positive, got {eps}")
    r_men = (1 + eps) * (n / (n + k)) * math.log(n / abs(k))
    return Prediction(
        regime=Regime.COMPLETE,
        r_men_pred=r_men,
        r_women_pred=(n + k) / (1 + r_men),
        delta_pred=float(-k),
        r_men_range=(1.0, r_men),
        r_women_range=((n + k) / (1 + r_men), float(n + k + 1)),
    )


def predict(n: int, k: int, d: int, eps: float = 0.01) -> Prediction:
    """Pick the regime for (n, k, d) and evaluate its prediction."""
    if d < 1 or d > n:
        raise InvalidConfigError(f"need 1 <= d <= n, got d={d}, n={n}")
    if d == n and -n / 2 <= k <= -1:
        return predict_complete_akl(n, k, eps)
    if n >= 2 and d >= 2 and d > math.log(n) ** 2:
        return predict_dense(n, k, d)
    return predict_moderate(n, d)


def coupon_collector_tail(n: int, beta: float) -> float:
    """Bound n^(1-beta) on P(draws to collect n coupons >= beta * n * log n)."""
    if beta <= 1:
        raise InvalidConfigError(f"beta must exceed 1, got {beta}")
    return float(n ** (1 - beta))


def prediction_table(n: int, k: int, d_values: Iterable[int]) -> Table:
    """Overlay curves for a degree sweep: moderate and dense predictions side by side."""
    table = Table(
        columns=(
            "n",
            "k",
            "d",
            "regime",
            "sqrt_d",
            "n_exp_neg_sqrt_d",
            "log_n",
            "d_over_log_n",
        )
    )
    log_n = math.log(n)
    for d in d_values:
        chosen = predict(n, k, d)
        moderate = predict_moderate(n, d)
        table.rows.append(
            {
                "n": n,
                "k": k,
                "d": d,
                "regime": chosen.regime.value,
                "sqrt_d": moderate.r_men_pred,
                "n_exp_neg_sqrt_d": moderate.delta_pred,
                "log_n": log_n,
                "d_over_log_n": d / log_n if log_n > 0 else float("nan"),
            }
        )
    return table
