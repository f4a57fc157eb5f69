"""
Averaging error |A_eps f - f|_1 as eps shrinks.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from core.density import ConeDensity, average_op, l1_distance

from .fitting import FitResult, fit_loglog

logger = logging.getLogger(__name__)


@dataclass
class AveragingScan:
    """
    Attributes:
        eps: Window half-widths
        errors: |A_eps f - f|_1 per eps
        fit: log error against log eps
        ratio: sup over eps of error / eps^(1 - alpha)
    """
    eps: np.ndarray
    errors: np.ndarray
    fit: FitResult
    ratio: float

    def rows(self) -> List[Tuple[float, float]]:
        return list(zip(self.eps.tolist(), self.errors.tolist()))


def averaging_scan(f: ConeDensity, eps_list: Sequence[float]) -> AveragingScan:
    eps = np.asarray(sorted(eps_list), dtype=float)
    errors = np.array([l1_distance(average_op(f, e), f) for e in eps])
    fit = fit_loglog(eps, errors)
    ratio = float(np.max(errors / eps ** (1.0 - f.mesh.alpha)))
    logger.info(f"Averaging error exponent {fit.slope:.4f}, ratio {ratio:.4g}")
    return AveragingScan(eps=eps, errors=errors, fit=fit, ratio=ratio)
