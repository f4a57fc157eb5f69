"""
Empirical distortion of the composed maps along an arc.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from core.errors import DomainError
from core.maps import (
    BRANCH_POINT,
    ArcSet,
    MapSequence,
    Regime,
    classify_iterate,
    eval_deriv,
    eval_map,
    preimage_ladder,
    push_arc,
)

logger = logging.getLogger(__name__)

LADDER_DEPTH = 16


@dataclass
class DistortionScan:
    """
    Distortion sup |log (T_1^n)'(a) / (T_1^n)'(b)| after each step.

    Attributes:
        values: values[j - 1] is the distortion after j maps
        spans_branch: Whether the image after j - 1 maps contains the branch point
        regimes: Classification of the image after j maps
    """
    values: np.ndarray
    spans_branch: List[bool]
    regimes: List[Optional[Regime]]

    @property
    def final(self) -> float:
        return float(self.values[-1]) if len(self.values) else 0.0


def _ladder_for(betas: MapSequence, start: int):
    depth = min(LADDER_DEPTH, betas.length - start)
    if depth >= 3:
        return preimage_ladder(betas, k=start, n=depth)
    return preimage_ladder(betas.alpha, k=0, n=LADDER_DEPTH)


def distortion_scan(
    betas: MapSequence,
    lo: float,
    hi: float,
    n: int,
    grid: int = 65,
) -> DistortionScan:
    """
    Chain-rule distortion of T_1^n over a grid of points in J = [lo, hi).

    Args:
        betas: Map sequence
        lo, hi: Arc endpoints, 0 <= lo <= hi <= 1
        n: Number of maps
        grid: Number of sample points; a degenerate arc uses one point
    """
    if not (0.0 <= lo <= hi <= 1.0):
        raise DomainError(f"invalid arc [{lo}, {hi})")
    points = np.array([lo]) if hi == lo else np.linspace(lo, hi, grid, endpoint=False)
    arcs = ArcSet.from_arc(lo, hi) if hi > lo else None
    log_deriv = np.zeros_like(points)

    values, spans, regimes = [], [], []
    for j, beta in enumerate(betas.window(1, n), start=1):
        beta = float(beta)
        spans.append(bool(points.min() < BRANCH_POINT < points.max()))
        log_deriv += np.log(np.asarray(eval_deriv(beta, points)))
        points = np.asarray(eval_map(beta, points))
        points = np.where(points >= 1.0, 0.0, points)
        values.append(float(log_deriv.max() - log_deriv.min()))
        if arcs is not None:
            arcs = push_arc(beta, arcs)
            regimes.append(classify_iterate(arcs, _ladder_for(betas, j)))
        else:
            regimes.append(None)

    scan = DistortionScan(np.array(values), spans, regimes)
    logger.debug(f"Distortion over [{lo}, {hi}) after {n} maps: {scan.final:.4g}")
    return scan
