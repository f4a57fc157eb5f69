"""
Regression harness for polynomial and polylogarithmic decay rates.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import DomainError, InsufficientDataError

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 5
CHECKPOINT_RATIO = 1.2
WINDOW_MIN = 10
WINDOW_FRACTION = 1.0 / 20.0


@dataclass
class DecaySeries:
    """
    Checkpointed experiment output.

    Attributes:
        ns: Strictly increasing step counts
        values: Nonnegative measurements D_n
        meta: Run description (alpha, seed, policy, mesh, observables)
    """
    ns: np.ndarray
    values: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.ns = np.asarray(self.ns, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        if self.ns.shape != self.values.shape:
            raise DomainError("ns and values must have the same length")
        if np.any(np.diff(self.ns) <= 0):
            raise DomainError("ns must be strictly increasing")
        if np.any(self.values < 0.0):
            raise DomainError("decay values must be nonnegative")

    def rows(self) -> List[Tuple[int, float]]:
        return list(zip(self.ns.tolist(), self.values.tolist()))


@dataclass
class FitResult:
    """
    Least-squares line through log-transformed data.

    Attributes:
        slope: Fitted exponent
        intercept: Fitted log-constant
        log_log_correction_used: Whether (1/alpha) log log n was subtracted
        residual_rms: Root mean square of the residuals
        fit_window: (lo, hi) range of the abscissa used
        points: Number of points in the window
    """
    slope: float
    intercept: float
    log_log_correction_used: bool
    residual_rms: float
    fit_window: Tuple[float, float]
    points: int = 0

    def __post_init__(self):
        if self.residual_rms < 0.0:
            raise DomainError("residual_rms must be nonnegative")
        if not self.fit_window[0] < self.fit_window[1]:
            raise DomainError(f"fit window {self.fit_window} is empty")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual_rms": self.residual_rms,
            "window": list(self.fit_window),
            "log_log_correction_used": self.log_log_correction_used,
        }


def ols_line(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float, float]:
    """Slope, intercept and residual rms of the least-squares line."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    design = np.column_stack((xs, np.ones_like(xs)))
    (slope, intercept), *_ = np.linalg.lstsq(design, ys, rcond=None)
    residual = ys - (slope * xs + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(residual ** 2)))


def fit_loglog(xs: Sequence[float], ys: Sequence[float]) -> FitResult:
    """Fit log y = c + s log x over all given points."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2:
        raise InsufficientDataError(f"need at least 2 points, got {len(xs)}")
    if np.any(xs <= 0.0) or np.any(ys <= 0.0):
        raise DomainError("log-log fit needs positive data")
    slope, intercept, rms = ols_line(np.log(xs), np.log(ys))
    return FitResult(slope, intercept, False, rms, (float(xs.min()), float(xs.max())), len(xs))


def fit_poly_log(
    series: DecaySeries,
    use_log_correction: bool = False,
    window: Optional[Tuple[float, float]] = None,
    alpha: Optional[float] = None,
) -> FitResult:
    """
    Fit log D_n = c + s log n, optionally after removing (1/alpha) log log n.

    Args:
        series: Measurements to fit
        use_log_correction: Subtract (1/alpha) log log n before fitting
        window: Inclusive (n_lo, n_hi); defaults to the whole series
        alpha: Exponent for the correction; defaults to series.meta["alpha"]

    Raises:
        InsufficientDataError: fewer than 5 points in the window
        DomainError: a value in the window is not positive
    """
    ns = series.ns.astype(float)
    lo, hi = window if window is not None else (float(ns.min()), float(ns.max()))
    mask = (ns >= lo) & (ns <= hi)
    n, d = ns[mask], series.values[mask]
    if len(n) < MIN_FIT_POINTS:
        raise InsufficientDataError(
            f"fit window [{lo}, {hi}] holds {len(n)} points, need {MIN_FIT_POINTS}"
        )
    if np.any(d <= 0.0):
        raise DomainError("fit_poly_log needs positive values in the window")

    y = np.log(d)
    if use_log_correction:
        alpha = alpha if alpha is not None else series.meta.get("alpha")
        if alpha is None:
            raise DomainError("log correction needs alpha")
        if np.any(n <= 1.0):
            raise DomainError("log correction needs n > 1")
        y = y - np.log(np.log(n)) / alpha
    slope, intercept, rms = ols_line(np.log(n), y)
    return FitResult(slope, intercept, use_log_correction, rms, (float(n.min()), float(n.max())), len(n))


def geometric_checkpoints(n_max: int, ratio: float = CHECKPOINT_RATIO) -> np.ndarray:
    """Distinct ceil(ratio^k) up to n_max, always ending at n_max."""
    if n_max < 1:
        raise DomainError(f"n_max must be positive, got {n_max}")
    points = {n_max}
    k = 0
    while True:
        n = math.ceil(ratio ** k)
        if n >= n_max:
            break
        points.add(n)
        k += 1
    return np.array(sorted(points), dtype=np.int64)


def default_window(
    n_max: int,
    window_min: int = WINDOW_MIN,
    fraction: float = WINDOW_FRACTION,
) -> Tuple[float, float]:
    """[max(window_min, fraction * n_max), n_max]."""
    return float(max(window_min, fraction * n_max)), float(n_max)


def rate_envelope(ns: np.ndarray, alpha: float) -> np.ndarray:
    """n^(1 - 1/alpha) (log n)^(1/alpha)."""
    ns = np.asarray(ns, dtype=float)
    return ns ** (1.0 - 1.0 / alpha) * np.log(ns) ** (1.0 / alpha)


def envelope_constant(
    series: DecaySeries,
    alpha: float,
    norm_sum: float,
    n_min: int = WINDOW_MIN,
) -> float:
    """Smallest C with D_n <= C (|phi|_1 + |psi|_1) n^(1-1/alpha) (log n)^(1/alpha) for n >= n_min."""
    mask = series.ns >= n_min
    if not np.any(mask) or norm_sum <= 0.0:
        return 0.0
    ratio = series.values[mask] / (norm_sum * rate_envelope(series.ns[mask], alpha))
    return float(ratio.max())
