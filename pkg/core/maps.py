"""
Two-branch intermittent circle maps and their inverse branches.

Each map of the family is

    T_beta(x) = x + c_beta * x**(1 + beta)   for 0 <= x <= 2/3
    T_beta(x) = 3x - 2                        for 2/3 < x <= 1

with c_beta = 3**beta / 2**(1 + beta), so that T_beta(2/3) = 1 for every beta.
beta = 0 gives the uniformly expanding map 3x/2 on the left branch. The circle
is [0, 1) with 1 identified with 0.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConvergenceError, DomainError, SequenceExhaustedError

logger = logging.getLogger(__name__)

BRANCH_POINT = 2.0 / 3.0
INVERSION_TOL = 1e-14
MAX_NEWTON_ITER = 60
MAX_BISECT_ITER = 200
# Arcs closer than this are merged when tracking images on the circle
ARC_GAP_TOL = 1e-15

ArrayLike = Union[float, np.ndarray]


def coefficient(beta: float) -> float:
    """Left-branch coefficient c_beta = 3^beta / 2^(1+beta)."""
    return 3.0 ** beta / 2.0 ** (1.0 + beta)


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not (0.0 <= beta < 1.0) or math.isnan(beta):
        raise DomainError(f"beta must satisfy 0 <= beta < 1, got {beta}")
    return beta


def _check_unit(x: ArrayLike, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")
    return arr


def _scalar_or_array(arr: np.ndarray, like: ArrayLike) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(arr)
    return arr


# =============================================================================
# Family and parameter types
# =============================================================================

@dataclass(frozen=True)
class FamilyConfig:
    """Exponent cap shared by every map in a sequence.

    Attributes:
        alpha: Upper bound on the map exponents, 0 < alpha < 1
    """
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise DomainError(f"alpha must satisfy 0 < alpha < 1, got {self.alpha}")


class Policy(Enum):
    """How the exponents of a sequence are produced."""
    CONSTANT = "constant"
    UNIFORM = "uniform"
    EXPLICIT = "explicit"
    POWER_DECAY = "power-decay"
    STRETCHED_EXP = "stretched-exp"

    @classmethod
    def parse(cls, value: Union[str, "Policy"]) -> "Policy":
        if isinstance(value, Policy):
            return value
        try:
            return cls(value)
        except ValueError:
            names = ", ".join(p.value for p in cls)
            raise DomainError(f"Unknown policy '{value}' (expected one of: {names})") from None


def iter_betas(
    alpha: float,
    policy: Union[str, Policy],
    seed: int = 0,
    chunk: int = 1 << 16,
    **params: Any,
) -> Iterator[float]:
    """
    Stream the exponents of a sequence without materializing it.

    The first n values always equal MapSequence.generate(..., length=n).betas,
    whatever the chunk size.

    Args:
        alpha: Family exponent cap
        policy: Generation policy
        seed: Seed for the random policies
        chunk: Number of values drawn per batch
        **params: Policy parameters (beta, beta_min, values, theta, c)

    Yields:
        beta_1, beta_2, ... in order
    """
    FamilyConfig(alpha)
    policy = Policy.parse(policy)

    if policy is Policy.CONSTANT:
        beta = float(params.get("beta", alpha))
        while True:
            yield beta
    elif policy is Policy.UNIFORM:
        beta_min = float(params.get("beta_min", 0.0))
        rng = np.random.default_rng(seed)
        while True:
            # alpha - width * U with U in [0, 1) lands in (beta_min, alpha]
            for u in rng.random(chunk):
                yield alpha - (alpha - beta_min) * float(u)
    elif policy is Policy.EXPLICIT:
        values = params.get("values") or []
        for value in values:
            yield float(value)
    else:
        k = 1
        while True:
            yield _decaying_beta(policy, alpha, k, params)
            k += 1


def _decaying_beta(policy: Policy, alpha: float, k: int, params: Dict[str, Any]) -> float:
    theta = float(params.get("theta", 0.5))
    if policy is Policy.POWER_DECAY:
        return alpha * k ** (-theta)
    rate = float(params.get("c", 1.0))
    return alpha * math.exp(-rate * k ** theta)


@dataclass
class MapSequence:
    """
    Reproducible finite sequence of map exponents beta_1 ... beta_n.

    Attributes:
        alpha: Family exponent cap
        seed: Seed of the random policies
        length: Number of maps
        betas: Exponents, betas[k - 1] is the exponent of the k-th map
        policy: Generation policy
        params: Policy parameters needed to regenerate the sequence
    """
    alpha: float
    seed: int
    length: int
    betas: np.ndarray
    policy: Policy = Policy.CONSTANT
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        FamilyConfig(self.alpha)
        self.betas = np.asarray(self.betas, dtype=float)
        if self.length < 1 or self.betas.shape != (self.length,):
            raise DomainError(
                f"betas must hold exactly length={self.length} entries, got {self.betas.shape}"
            )
        if np.any(self.betas < 0.0) or np.any(self.betas > self.alpha):
            raise DomainError(f"every beta must lie in [0, alpha={self.alpha}]")

    @classmethod
    def generate(
        cls,
        alpha: float,
        policy: Union[str, Policy],
        length: int,
        seed: int = 0,
        **params: Any,
    ) -> "MapSequence":
        """Build a sequence from (seed, policy, length) deterministically."""
        policy = Policy.parse(policy)
        if length < 1:
            raise DomainError(f"length must be positive, got {length}")
        if policy is Policy.UNIFORM:
            beta_min = float(params.get("beta_min", 0.0))
            if not (0.0 <= beta_min < alpha):
                raise DomainError(f"beta_min must satisfy 0 <= beta_min < alpha, got {beta_min}")
        if policy is Policy.EXPLICIT and len(params.get("values") or []) < length:
            raise SequenceExhaustedError(
                f"explicit policy lists {len(params.get('values') or [])} values, need {length}"
            )
        stream = iter_betas(alpha, policy, seed, chunk=max(1, min(length, 1 << 16)), **params)
        betas = np.fromiter(stream, dtype=float, count=length)
        return cls(alpha=alpha, seed=seed, length=length, betas=betas, policy=policy, params=params)

    @classmethod
    def constant(cls, beta: float, length: int, alpha: Optional[float] = None) -> "MapSequence":
        """Sequence repeating one exponent. alpha defaults to beta (or 1/2 for beta = 0)."""
        cap = alpha if alpha is not None else (beta if beta > 0 else 0.5)
        return cls.generate(cap, Policy.CONSTANT, length, beta=beta)

    def beta_at(self, k: int) -> float:
        """Exponent of the k-th map, 1-based."""
        if not 1 <= k <= self.length:
            raise SequenceExhaustedError(f"map index {k} outside 1..{self.length}")
        return float(self.betas[k - 1])

    def window(self, start: int, count: int) -> np.ndarray:
        """Exponents beta_start ... beta_(start + count - 1), 1-based."""
        if start < 1 or start + count - 1 > self.length:
            raise SequenceExhaustedError(
                f"need maps {start}..{start + count - 1}, sequence has {self.length}"
            )
        return self.betas[start - 1:start - 1 + count]

    def is_constant(self) -> bool:
        return bool(np.all(self.betas == self.betas[0]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "seed": self.seed,
            "length": self.length,
            "policy": self.policy.value,
            "params": self.params,
        }


# =============================================================================
# Pointwise evaluation
# =============================================================================

def eval_map(beta: float, x: ArrayLike) -> ArrayLike:
    """
    Evaluate T_beta on [0, 1].

    eval_map(beta, 1) returns 1.0; callers working on the circle reduce it to 0.

    Args:
        beta: Map exponent
        x: Point or array of points in [0, 1]

    Returns:
        T_beta(x), same shape as x
    """
    beta = _check_beta(beta)
    arr = _check_unit(x)
    left = arr + coefficient(beta) * arr ** (1.0 + beta)
    out = np.where(arr <= BRANCH_POINT, left, 3.0 * arr - 2.0)
    # c_beta (2/3)^(1+beta) = 1/3 analytically
    out = np.where(arr == BRANCH_POINT, 1.0, out)
    return _scalar_or_array(out, x)


def eval_deriv(beta: float, x: ArrayLike) -> ArrayLike:
    """
    Derivative of T_beta, using the left-branch value at the branch point.

    Args:
        beta: Map exponent
        x: Point or array of points in [0, 1]

    Returns:
        T_beta'(x) >= 1
    """
    beta = _check_beta(beta)
    arr = _check_unit(x)
    left = 1.0 + (1.0 + beta) * coefficient(beta) * arr ** beta
    out = np.where(arr <= BRANCH_POINT, left, 3.0)
    return _scalar_or_array(out, x)


def _left_inverse_scalar(beta: float, c: float, y: float) -> float:
    """Scalar left inverse; Newton descends monotonically from x0 >= root."""
    if y <= 0.0:
        return 0.0
    if y >= 1.0:
        return BRANCH_POINT
    if beta == 0.0:
        return y / (1.0 + c)
    hi = y if y < BRANCH_POINT else BRANCH_POINT
    lo = 0.0
    x = hi
    for _ in range(MAX_NEWTON_ITER):
        xb = x ** beta
        g = x + c * x * xb - y
        if g > 0.0:
            hi = x
        else:
            lo = x
        step = g / (1.0 + (1.0 + beta) * c * xb)
        x_new = x - step
        if not (lo <= x_new <= hi):
            break
        if abs(step) <= INVERSION_TOL:
            return x_new
        x = x_new
    logger.debug(f"Newton left the bracket for y={y}, beta={beta}; bisecting")
    return _bisect(lambda t: t + c * t ** (1.0 + beta) - y, lo, hi)


def _bisect(func, lo: float, hi: float) -> float:
    for _ in range(MAX_BISECT_ITER):
        mid = 0.5 * (lo + hi)
        if hi - lo <= INVERSION_TOL:
            return mid
        if func(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    raise ConvergenceError(f"bisection did not reach {INVERSION_TOL} on [{lo}, {hi}]")


def _left_inverse_array(beta: float, c: float, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if beta == 0.0:
        return np.clip(y, 0.0, 1.0) / (1.0 + c)
    x = np.minimum(y, BRANCH_POINT)
    x = np.where(y >= 1.0, BRANCH_POINT, x)
    x = np.where(y <= 0.0, 0.0, x)
    active = (y > 0.0) & (y < 1.0)
    for _ in range(MAX_NEWTON_ITER):
        if not np.any(active):
            return x
        xa = x[active]
        xb = xa ** beta
        step = (xa + c * xa * xb - y[active]) / (1.0 + (1.0 + beta) * c * xb)
        x_new = xa - step
        # a convex increasing function seen from above stays above the root
        bad = (x_new < 0.0) | (x_new > xa + INVERSION_TOL) | ~np.isfinite(x_new)
        x_new = np.where(bad, xa, x_new)
        x[active] = x_new
        done = (np.abs(step) <= INVERSION_TOL) | bad
        idx = np.flatnonzero(active)
        if np.any(bad):
            for i in idx[bad]:
                x[i] = _left_inverse_scalar(beta, c, float(y[i]))
        active[idx[done]] = False
    if np.any(active):
        for i in np.flatnonzero(active):
            x[i] = _left_inverse_scalar(beta, c, float(y[i]))
    return x


def invert_branch(beta: float, y: ArrayLike, branch: str = "left") -> ArrayLike:
    """
    Preimage of y under one branch of T_beta.

    Args:
        beta: Map exponent
        y: Point or array of points in [0, 1]
        branch: "left" (x in [0, 2/3]) or "right" (x in [2/3, 1])

    Returns:
        x with T_beta(x) = y to within 1e-13

    Raises:
        DomainError: y outside [0, 1] or unknown branch
        ConvergenceError: root iteration failed (internal invariant violation)
    """
    beta = _check_beta(beta)
    arr = _check_unit(y, "y")
    if branch == "right":
        return _scalar_or_array((arr + 2.0) / 3.0, y)
    if branch != "left":
        raise DomainError(f"branch must be 'left' or 'right', got {branch!r}")
    c = coefficient(beta)
    if np.ndim(y) == 0:
        return _left_inverse_scalar(beta, c, float(arr))
    return _left_inverse_array(beta, c, arr.copy())


# =============================================================================
# Preimage ladders
# =============================================================================

@dataclass(frozen=True)
class PreimageLadder:
    """
    Leftmost preimages a_0^k = 1 > a_1^k > ... > a_n^k of 1.

    a_n^k is the leftmost preimage of 1 under T_(k+n) o ... o T_(k+1).
    """
    k: int
    values: np.ndarray

    @property
    def n(self) -> int:
        return len(self.values) - 1

    def interval(self, n: int) -> Tuple[float, float]:
        """I_n^k = [a_(n+1)^k, a_n^k]."""
        return float(self.values[n + 1]), float(self.values[n])


def preimage_ladder(
    betas: Union[MapSequence, float],
    k: int = 0,
    n: int = 1,
) -> PreimageLadder:
    """
    Leftmost preimage ladder starting at map index k.

    Args:
        betas: A MapSequence, or a float for the constant-exponent ladder
        k: Start index (the first map inverted is T_(k+1))
        n: Number of levels

    Returns:
        PreimageLadder with n + 1 values

    Raises:
        SequenceExhaustedError: maps k+1 ... k+n not available
    """
    if n < 1:
        raise DomainError(f"ladder needs n >= 1, got {n}")
    if k < 0:
        raise SequenceExhaustedError(f"start index must be nonnegative, got {k}")

    if not isinstance(betas, MapSequence):
        beta = _check_beta(float(betas))
        return PreimageLadder(k=k, values=_constant_ladder(beta, n))

    window = betas.window(k + 1, n)
    if np.all(window == window[0]):
        return PreimageLadder(k=k, values=_constant_ladder(float(window[0]), n))

    # a_m^j = L_(j+1)^(-1)(a_(m-1)^(j+1)): sweep j from k+n-1 down to k,
    # keeping the ladder a_0^j ... a_(k+n-j)^j of the current start index.
    level = np.ones(1)
    for j in range(n - 1, -1, -1):
        beta = float(window[j])
        level = np.concatenate(([1.0], _left_inverse_array(beta, coefficient(beta), level)))
    return PreimageLadder(k=k, values=level)


def _constant_ladder(beta: float, n: int) -> np.ndarray:
    c = coefficient(beta)
    values = np.empty(n + 1)
    values[0] = 1.0
    y = 1.0
    for j in range(1, n + 1):
        y = _left_inverse_scalar(beta, c, y)
        values[j] = y
    return values


# =============================================================================
# Arc tracking on the circle
# =============================================================================

@dataclass(frozen=True)
class ArcSet:
    """
    Finite union of disjoint half-open arcs [lo, hi) of the circle.

    A wrapping arc is stored as two entries, one ending at 1 and one starting
    at 0. The full circle is the single entry (0, 1).
    """
    arcs: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        prev_hi = -1.0
        for lo, hi in self.arcs:
            if not (0.0 <= lo < hi <= 1.0):
                raise DomainError(f"invalid arc [{lo}, {hi})")
            if lo < prev_hi:
                raise DomainError("arcs must be sorted and disjoint")
            prev_hi = hi

    @classmethod
    def from_arc(cls, lo: float, hi: float) -> "ArcSet":
        """Arc from lo to hi going counterclockwise; endpoints taken mod 1."""
        length = hi - lo
        if length <= 0.0:
            raise DomainError(f"arc [{lo}, {hi}) has no length")
        if length >= 1.0:
            return cls.full_circle()
        lo = lo % 1.0
        hi = lo + length
        if hi <= 1.0:
            return cls(((lo, hi),))
        return cls(_merge([(0.0, hi - 1.0), (lo, 1.0)]))

    @classmethod
    def full_circle(cls) -> "ArcSet":
        return cls(((0.0, 1.0),))

    @property
    def total_length(self) -> float:
        return math.fsum(hi - lo for lo, hi in self.arcs)

    def is_full(self) -> bool:
        return self.arcs == ((0.0, 1.0),)

    def contains(self, x: float) -> bool:
        x = x % 1.0
        return any(lo <= x < hi for lo, hi in self.arcs)

    def intersects(self, lo: float, hi: float) -> bool:
        return any(a < hi and lo < b for a, b in self.arcs)


def _merge(pieces: Sequence[Tuple[float, float]]) -> Tuple[Tuple[float, float], ...]:
    merged: List[List[float]] = []
    for lo, hi in sorted(p for p in pieces if p[1] > p[0]):
        if merged and lo <= merged[-1][1] + ARC_GAP_TOL:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    for arc in merged:
        if arc[0] <= ARC_GAP_TOL:
            arc[0] = 0.0
        if arc[1] >= 1.0 - ARC_GAP_TOL:
            arc[1] = 1.0
    return tuple((lo, hi) for lo, hi in merged)


def push_arc(beta: float, arcs: ArcSet) -> ArcSet:
    """
    Image of an arc set under T_beta.

    Each arc is split at the branch point, every monotone piece is mapped
    endpoint to endpoint, and overlapping images are merged.

    Args:
        beta: Map exponent
        arcs: Arcs to push

    Returns:
        The image ArcSet; its total length is never smaller than the input's
    """
    beta = _check_beta(beta)
    if arcs.is_full():
        return arcs
    pieces: List[Tuple[float, float]] = []
    for lo, hi in arcs.arcs:
        if lo < BRANCH_POINT:
            top = min(hi, BRANCH_POINT)
            image_hi = 1.0 if top == BRANCH_POINT else float(eval_map(beta, top))
            pieces.append((float(eval_map(beta, lo)), image_hi))
        if hi > BRANCH_POINT:
            bottom = max(lo, BRANCH_POINT)
            image_lo = 0.0 if bottom == BRANCH_POINT else 3.0 * bottom - 2.0
            pieces.append((image_lo, min(3.0 * hi - 2.0, 1.0)))
    return ArcSet(_merge(pieces))


class Regime(Enum):
    """Position of an arc iterate relative to the neutral fixed point."""
    HYPERBOLIC = "hyperbolic"
    INTERMITTENT_SINGLE = "intermittent-single"
    INTERMITTENT_MULTI = "intermittent-multi"


def classify_iterate(arcs: ArcSet, ladder: PreimageLadder) -> Regime:
    """
    Classify an arc iterate by the ladder points it contains.

    Arcs missing I = [0, a_2] are hyperbolic. Otherwise the iterate is
    intermittent, with one or several ladder points a_l (l > 2) inside it.
    """
    if ladder.n < 2:
        raise DomainError("classification needs a ladder with at least 2 levels")
    if not arcs.intersects(0.0, float(ladder.values[2])):
        return Regime.HYPERBOLIC
    if arcs.contains(0.0):
        return Regime.INTERMITTENT_MULTI
    inside = sum(1 for a in ladder.values[3:] if arcs.contains(float(a)))
    if inside <= 1:
        return Regime.INTERMITTENT_SINGLE
    return Regime.INTERMITTENT_MULTI
