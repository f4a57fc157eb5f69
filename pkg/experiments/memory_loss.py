"""
Loss-of-memory and correlation-decay experiments.

Two densities with equal mass are pushed through the same sequence of
transfer operators and their L1 distance D_n is recorded at geometric
checkpoints. The theoretical envelope is n^(1 - 1/alpha) (log n)^(1/alpha).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.cones import ConeParams, is_in_C2
from core.density import (
    QUADRATURE_ORDER,
    C1Observable,
    ConeDensity,
    integrate_against,
    l1_distance,
    l1_norm,
    mass,
)
from core.errors import (
    ConeMembershipError,
    DomainError,
    InsufficientDataError,
    MassMismatchError,
)
from core.maps import MapSequence, Policy, eval_map
from core.transfer import DEFAULT_C_COV, default_n_eps, iterate_push

from .fitting import (
    DecaySeries,
    FitResult,
    default_window,
    envelope_constant,
    fit_poly_log,
    geometric_checkpoints,
)

logger = logging.getLogger(__name__)

MASS_TOL = 1e-8
CONE_TOL = 1e-6
# Acceptance band for the fitted slope around the target 1 - 1/alpha = -1 at alpha = 1/2
DEFAULT_BAND = (-1.25, -0.85)
BAND_MODES = ("upper", "two-sided")
CORRELATION_METHODS = ("orbit", "transfer")
# Orbit checkpoints count as resolved while the quadrature error stays below this share of the bound
RESOLVED_FRACTION = 0.1


@dataclass
class MemoryLossRun:
    """Series, fit and envelope constant of one memory-loss run."""
    series: DecaySeries
    fit: Optional[FitResult]
    envelope: float
    norm_sum: float
    sequence: Dict[str, Any] = field(default_factory=dict)
    final: Optional[ConeDensity] = None

    def within_band(self, band: Tuple[float, float] = DEFAULT_BAND) -> bool:
        """Fitted slope inside [band[0], band[1]]."""
        return self.fit is not None and band[0] <= self.fit.slope <= band[1]

    def meets_bound(self, band: Tuple[float, float] = DEFAULT_BAND) -> bool:
        """
        Fitted slope no larger than the upper band edge.

        The rate is an upper bound on the loss of memory; sequences that
        forget faster fit steeper slopes and still satisfy it.
        """
        return self.fit is not None and self.fit.slope <= band[1]

    def accepts(self, band: Tuple[float, float] = DEFAULT_BAND, mode: str = "upper") -> bool:
        """Band check of the given mode: "upper" or "two-sided"."""
        if mode not in BAND_MODES:
            raise DomainError(f"band mode must be one of {BAND_MODES}, got {mode!r}")
        return self.within_band(band) if mode == "two-sided" else self.meets_bound(band)


def _sequence(
    alpha: float,
    seed: int,
    policy: Any,
    length: int,
    betas: Optional[MapSequence],
    params: Dict[str, Any],
) -> MapSequence:
    if betas is not None:
        if betas.length < length:
            raise DomainError(f"sequence holds {betas.length} maps, run needs {length}")
        return betas
    return MapSequence.generate(alpha, policy, length, seed=seed, **params)


def _check_inputs(phi: ConeDensity, psi: ConeDensity, cone: ConeParams) -> ConeDensity:
    """Validate the pair and return psi rescaled to the quadrature mass of phi."""
    m_phi, m_psi = mass(phi), mass(psi)
    if abs(m_phi - m_psi) > MASS_TOL:
        raise MassMismatchError(f"masses differ: m(phi)={m_phi:.12g}, m(psi)={m_psi:.12g}")
    for label, f in (("phi", phi), ("psi", psi)):
        report = is_in_C2(f, cone, tol=CONE_TOL)
        if not report:
            raise ConeMembershipError(f"{label} is not in C2", report.to_dicts())
    # A leftover mass gap is conserved by every push and floors D_n
    if m_psi != m_phi and m_psi != 0.0:
        psi = psi * (m_phi / m_psi)
    return psi


def memory_loss_experiment(
    alpha: float,
    seed: int,
    policy: Any,
    phi: ConeDensity,
    psi: ConeDensity,
    n_max: int,
    checkpoints: Optional[Sequence[int]] = None,
    cone: Optional[ConeParams] = None,
    use_log_correction: bool = True,
    window: Optional[Tuple[float, float]] = None,
    betas: Optional[MapSequence] = None,
    policy_params: Optional[Dict[str, Any]] = None,
    conserve: bool = True,
) -> MemoryLossRun:
    """
    Record D_n = |P_1^n phi - P_1^n psi|_1 at checkpoints and fit its rate.

    Args:
        alpha: Family exponent cap
        seed: Sequence seed
        policy: Sequence policy
        phi, psi: Equal-mass members of C2
        n_max: Last step
        checkpoints: Steps to record; geometric ceil(1.2^k) by default
        cone: Cone constants; a = a_min(alpha) by default
        use_log_correction: Remove (1/alpha) log log n before fitting
        window: Fit window; [max(10, n_max/20), n_max] by default
        betas: Explicit sequence overriding (seed, policy)
        policy_params: Extra policy parameters
        conserve: Apply the linear mass correction at every step

    Raises:
        MassMismatchError: masses differ by more than 1e-8
        ConeMembershipError: an input fails the C2 check
    """
    cone = cone or ConeParams(alpha)
    psi = _check_inputs(phi, psi, cone)
    sequence = _sequence(alpha, seed, policy, n_max, betas, policy_params or {})
    steps = np.asarray(checkpoints if checkpoints is not None else geometric_checkpoints(n_max))
    wanted = set(int(n) for n in steps if 1 <= n <= n_max)

    ns, values = [], []
    p_phi = phi
    for step, (p_phi, p_psi) in iterate_push(sequence, [phi, psi], n_max, conserve=conserve):
        if step in wanted:
            ns.append(step)
            values.append(l1_distance(p_phi, p_psi))

    norm_sum = l1_norm(phi) + l1_norm(psi)
    meta = {
        "alpha": alpha,
        "seed": seed,
        "policy": Policy.parse(policy).value if betas is None else sequence.policy.value,
        "mesh": phi.mesh.spec(),
    }
    series = DecaySeries(np.array(ns, dtype=np.int64), np.array(values), meta)
    fit = _try_fit(series, alpha, use_log_correction, window or default_window(n_max))
    run = MemoryLossRun(
        series=series,
        fit=fit,
        envelope=envelope_constant(series, alpha, norm_sum),
        norm_sum=norm_sum,
        sequence=sequence.to_dict(),
        final=p_phi,
    )
    if fit is not None:
        logger.info(
            f"Memory loss alpha={alpha} seed={seed}: slope={fit.slope:.4f}, "
            f"envelope C={run.envelope:.4g}"
        )
        if not DEFAULT_BAND[0] <= fit.slope <= DEFAULT_BAND[1]:
            logger.warning(f"Slope {fit.slope:.4f} outside the band {DEFAULT_BAND}")
    return run


def _try_fit(
    series: DecaySeries,
    alpha: float,
    use_log_correction: bool,
    window: Tuple[float, float],
) -> Optional[FitResult]:
    try:
        return fit_poly_log(series, use_log_correction, window, alpha=alpha)
    except (InsufficientDataError, DomainError) as e:
        logger.info(f"No rate fit: {e}")
        return None


@dataclass
class BatchResult:
    """Memory-loss runs over several sequences."""
    runs: List[MemoryLossRun]

    @property
    def slopes(self) -> List[float]:
        return [r.fit.slope for r in self.runs if r.fit is not None]

    @property
    def envelope_spread(self) -> float:
        """Largest ratio between the envelope constants of two runs."""
        constants = [r.envelope for r in self.runs if r.envelope > 0.0]
        if not constants:
            return 1.0
        return max(constants) / min(constants)


def memory_loss_batch(
    alpha: float,
    seeds: Sequence[int],
    policy: Any,
    phi: ConeDensity,
    psi: ConeDensity,
    n_max: int,
    max_workers: Optional[int] = None,
    **kwargs: Any,
) -> BatchResult:
    """Run memory_loss_experiment for every seed concurrently."""
    def run(seed: int) -> MemoryLossRun:
        return memory_loss_experiment(alpha, seed, policy, phi, psi, n_max, **kwargs)

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        runs = list(pool.map(run, seeds))
    return BatchResult(runs)


# =============================================================================
# Correlations
# =============================================================================

@dataclass
class CorrelationRun:
    """
    Correlation series with the memory-loss bound at each checkpoint.

    Attributes:
        series: |Cor_n| at the checkpoints
        bounds: |phi|_inf * |P_1^n psi - P_1^n (m(psi) 1)|_1
        errors: Quadrature error estimate of each value
        resolved: Whether the error estimate is small against the bound
    """
    series: DecaySeries
    bounds: np.ndarray
    errors: np.ndarray
    resolved: np.ndarray

    @property
    def slack(self) -> np.ndarray:
        return self.bounds - self.series.values

    @property
    def resolved_slack(self) -> np.ndarray:
        return self.slack[self.resolved]

    def rows(self) -> List[Tuple[int, float, float, bool]]:
        return [
            (n, v, b, bool(r))
            for (n, v), b, r in zip(self.series.rows(), self.bounds.tolist(), self.resolved.tolist())
        ]


def orbit(betas: MapSequence, x: np.ndarray, n: int) -> np.ndarray:
    """T_n o ... o T_1 applied to points, reduced to the circle [0, 1)."""
    y = np.asarray(x, dtype=float)
    for beta in betas.window(1, n):
        y = np.asarray(eval_map(float(beta), y))
        y = np.where(y >= 1.0, 0.0, y)
    return y


def _orbit_correlation(
    psi: ConeDensity,
    unit: ConeDensity,
    m_psi: float,
    composed: Callable[[np.ndarray], np.ndarray],
    order: int,
) -> float:
    return abs(integrate_against(psi, composed, order) - m_psi * integrate_against(unit, composed, order))


def correlation_experiment(
    alpha: float,
    seed: int,
    policy: Any,
    psi: ConeDensity,
    phi_obs: C1Observable,
    n_max: int,
    checkpoints: Optional[Sequence[int]] = None,
    cone: Optional[ConeParams] = None,
    betas: Optional[MapSequence] = None,
    method: str = "orbit",
    policy_params: Optional[Dict[str, Any]] = None,
) -> CorrelationRun:
    """
    |int psi (phi o T_1^n) dm - int psi dm int phi o T_1^n dm| at checkpoints.

    method="orbit" composes phi with the orbit at the quadrature points and
    integrates at two Gauss orders; their difference is the error estimate,
    and a checkpoint counts as resolved while that error stays below
    RESOLVED_FRACTION of the bound. Once phi o T_1^n oscillates on the scale
    of a cell the estimate grows and later checkpoints are reported only.
    method="transfer" integrates phi against P_1^n psi - m(psi) P_1^n 1 and
    is resolved everywhere. Each value is compared with
    |phi|_inf * |P_1^n psi - P_1^n (m(psi) 1)|_1.
    """
    cone = cone or ConeParams(alpha)
    report = is_in_C2(psi, cone, tol=CONE_TOL)
    if not report:
        raise ConeMembershipError("psi is not in C2", report.to_dicts())
    if method not in CORRELATION_METHODS:
        raise DomainError(f"unknown correlation method {method!r}")
    sequence = _sequence(alpha, seed, policy, n_max, betas, policy_params or {})
    steps = checkpoints if checkpoints is not None else geometric_checkpoints(n_max)
    wanted = set(int(n) for n in steps if 1 <= n <= n_max)

    m_psi = mass(psi)
    flat = ConeDensity.constant(psi.mesh, m_psi)
    unit = ConeDensity.constant(psi.mesh, 1.0)
    ns, values, bounds, errors = [], [], [], []
    for step, (p_psi, p_flat) in iterate_push(sequence, [psi, flat], n_max):
        if step not in wanted:
            continue
        if method == "transfer":
            value = abs(integrate_against(p_psi - p_flat, phi_obs))
            error = 0.0
        else:
            composed = lambda x, n=step: phi_obs(orbit(sequence, x, n))  # noqa: E731
            value = _orbit_correlation(psi, unit, m_psi, composed, QUADRATURE_ORDER)
            error = abs(value - _orbit_correlation(psi, unit, m_psi, composed, 2 * QUADRATURE_ORDER))
        ns.append(step)
        values.append(value)
        errors.append(error)
        bounds.append(phi_obs.sup_norm * l1_distance(p_psi, p_flat))

    series = DecaySeries(
        np.array(ns, dtype=np.int64),
        np.array(values),
        {"alpha": alpha, "seed": seed, "observable": phi_obs.name, "method": method},
    )
    bounds_arr = np.array(bounds)
    errors_arr = np.array(errors)
    run = CorrelationRun(
        series=series,
        bounds=bounds_arr,
        errors=errors_arr,
        resolved=errors_arr <= RESOLVED_FRACTION * bounds_arr,
    )
    if len(ns):
        unresolved = int(np.count_nonzero(~run.resolved))
        if unresolved:
            logger.info(f"Correlation run: {unresolved} of {len(ns)} checkpoints not resolved by the quadrature")
        if run.resolved.any():
            logger.info(f"Correlation run: min resolved slack {float(run.resolved_slack.min()):.3g}")
    return run



# =============================================================================
# Schedules
# =============================================================================

def epsilon_schedule(n: float, alpha: float, kappa: float = 1.0) -> float:
    """n^(-1/alpha) (kappa (1/alpha - 1) log n)^(1/alpha)."""
    if n < 3:
        raise DomainError(f"epsilon schedule needs n >= 3, got {n}")
    if kappa <= 0.0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must satisfy 0 < alpha < 1, got {alpha}")
    inv = 1.0 / alpha
    return n ** (-inv) * (kappa * (inv - 1.0) * math.log(n)) ** inv


def telescoped_bound(
    n: int,
    alpha: float,
    c: float = 1.0,
    gamma: float = 0.5,
    kappa: float = 1.0,
    c_cov: float = DEFAULT_C_COV,
) -> float:
    """
    c (n/n_eps) eps^(1-alpha) + e^gamma e^(-gamma n/n_eps) at eps = epsilon_schedule(n).

    The two terms are the accumulated averaging error and the contraction of
    the perturbed operator over n/n_eps blocks.
    """
    eps = epsilon_schedule(n, alpha, kappa)
    blocks = n / default_n_eps(eps, alpha, c_cov)
    return c * blocks * eps ** (1.0 - alpha) + math.exp(gamma) * math.exp(-gamma * blocks)
