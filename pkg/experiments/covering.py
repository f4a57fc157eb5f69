"""
Covering times of arcs under the sequential dynamics.

The arc [0, 2 eps) is tracked under two sequences: the configured one, and
the constant sequence beta = alpha, whose maps are the slowest to push an arc
away from the neutral fixed point. The covering exponent and C_cov are read
off the constant sequence, so they bound every sequence of the family.
"""

import logging
from dataclasses import dataclass
from typing import Any, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import ConvergenceError, DomainError
from core.maps import ArcSet, Policy, iter_betas, push_arc

from .fitting import FitResult, fit_loglog
from .preimages import an_asymptotics

logger = logging.getLogger(__name__)

MAX_COVER_STEPS = 10 ** 7


def cover_time(betas: Iterator[float], arcs: ArcSet, max_steps: int = MAX_COVER_STEPS) -> int:
    """
    Number of maps needed for the image of arcs to be the whole circle.

    Raises:
        ConvergenceError: not covered within max_steps
    """
    steps = 0
    while not arcs.is_full():
        if steps >= max_steps:
            raise ConvergenceError(f"arc not covered after {max_steps} steps")
        try:
            beta = next(betas)
        except StopIteration:
            raise DomainError(f"sequence ended after {steps} maps before covering") from None
        arcs = push_arc(beta, arcs)
        steps += 1
    return steps


def _try_fit(eps: np.ndarray, times: np.ndarray) -> Optional[FitResult]:
    if len(eps) >= 2 and np.unique(times).size > 1:
        return fit_loglog(1.0 / eps, times.astype(float))
    return None


@dataclass
class CoverScan:
    """
    Covering times over a list of arc half-widths.

    Attributes:
        eps: Half-widths, largest first
        worst: Cover times of [0, 2 eps) under the constant sequence beta = alpha
        sequence: Cover times of [0, 2 eps) under the configured sequence
        control: Cover times of [1/3 - eps, 1/3 + eps) under the configured sequence
        fit: log(worst) against log(1/eps)
        sequence_fit: log(sequence) against log(1/eps)
        c_cov: max over eps of worst * eps^alpha
        predicted: [3 c_alpha / (2 eps)]^alpha per eps
    """
    eps: np.ndarray
    worst: np.ndarray
    sequence: np.ndarray
    control: np.ndarray
    fit: Optional[FitResult]
    sequence_fit: Optional[FitResult]
    c_cov: float
    predicted: np.ndarray

    def rows(self) -> List[Tuple[float, int, int]]:
        return list(zip(self.eps.tolist(), self.worst.tolist(), self.sequence.tolist()))

    def control_rows(self) -> List[Tuple[float, int]]:
        return list(zip(self.eps.tolist(), self.control.tolist()))


def covering_time_scan(
    alpha: float,
    seed: int,
    policy: Any,
    eps_list: Sequence[float],
    max_steps: int = MAX_COVER_STEPS,
    ladder_length: int = 10 ** 4,
    **params: Any,
) -> CoverScan:
    """
    Track the arc at 0 and a control arc at 1/3 until they cover.

    Every eps restarts each sequence at its first map. When the configured
    sequence is itself constant at alpha, worst and sequence coincide.
    """
    eps_arr = np.asarray(sorted(eps_list, reverse=True), dtype=float)
    if np.any(eps_arr <= 0.0) or np.any(eps_arr >= 0.125):
        raise DomainError("eps values must lie in (0, 1/8)")

    def configured() -> Iterator[float]:
        return iter_betas(alpha, policy, seed, **params)

    def slowest() -> Iterator[float]:
        return iter_betas(alpha, Policy.CONSTANT, seed, beta=alpha)

    worst, sequence, control = [], [], []
    for eps in eps_arr:
        at_zero = ArcSet.from_arc(0.0, 2.0 * eps)
        worst.append(cover_time(slowest(), at_zero, max_steps))
        sequence.append(cover_time(configured(), at_zero, max_steps))
        control.append(cover_time(
            configured(), ArcSet.from_arc(1.0 / 3.0 - eps, 1.0 / 3.0 + eps), max_steps,
        ))
        logger.debug(
            f"eps={eps:.4g}: worst {worst[-1]}, sequence {sequence[-1]}, control {control[-1]}"
        )

    worst_arr = np.array(worst, dtype=np.int64)
    sequence_arr = np.array(sequence, dtype=np.int64)
    fit = _try_fit(eps_arr, worst_arr)
    c_cov = float(np.max(worst_arr * eps_arr ** alpha))
    c_alpha = an_asymptotics(alpha, ladder_length).c_alpha
    predicted = (3.0 * c_alpha / (2.0 * eps_arr)) ** alpha
    if fit is not None:
        logger.info(f"Covering alpha={alpha}: exponent {fit.slope:.4f}, C_cov={c_cov:.4g}")
    return CoverScan(
        eps=eps_arr,
        worst=worst_arr,
        sequence=sequence_arr,
        control=np.array(control, dtype=np.int64),
        fit=fit,
        sequence_fit=_try_fit(eps_arr, sequence_arr),
        c_cov=c_cov,
        predicted=predicted,
    )
