"""
Asymptotics of the leftmost preimage ladder a_n ~ n^(-1/alpha).
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.errors import DomainError
from core.maps import PreimageLadder, preimage_ladder

from .fitting import DecaySeries, FitResult, fit_poly_log, ols_line

logger = logging.getLogger(__name__)


@dataclass
class LadderFit:
    """
    Rate fit of a constant-exponent ladder.

    Attributes:
        fit: log a_n against log n on [n_max/10, n_max]
        c_alpha: max over n of a_n n^(1/beta)
        log_step: Slope of log a_n against n on the same window
        ladder: The ladder itself
    """
    fit: FitResult
    c_alpha: float
    log_step: float
    ladder: PreimageLadder

    def rows(self):
        values = self.ladder.values
        return [(n, float(values[n])) for n in range(1, len(values))]


def an_asymptotics(alpha: float, n_max: int, beta: Optional[float] = None) -> LadderFit:
    """
    Fit the decay of the constant-exponent ladder a_n.

    Args:
        alpha: Family exponent cap
        n_max: Ladder length
        beta: Ladder exponent, alpha by default; beta = 0 gives a_n = (2/3)^n
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must satisfy 0 < alpha < 1, got {alpha}")
    if n_max < 50:
        raise DomainError(f"n_max must be at least 50, got {n_max}")
    beta = alpha if beta is None else beta
    ladder = preimage_ladder(beta, k=0, n=n_max)
    ns = np.arange(1, n_max + 1)
    values = ladder.values[1:]
    window = (n_max / 10.0, float(n_max))

    series = DecaySeries(ns, values, {"alpha": alpha, "beta": beta})
    fit = fit_poly_log(series, use_log_correction=False, window=window)
    mask = (ns >= window[0]) & (ns <= window[1])
    log_step, _, _ = ols_line(ns[mask].astype(float), np.log(values[mask]))

    exponent = 1.0 / beta if beta > 0.0 else 1.0 / alpha
    c_alpha = float(np.max(values * ns.astype(float) ** exponent))
    logger.info(f"Ladder beta={beta}: slope={fit.slope:.4f}, c_alpha={c_alpha:.4g}")
    return LadderFit(fit=fit, c_alpha=c_alpha, log_step=log_step, ladder=ladder)
