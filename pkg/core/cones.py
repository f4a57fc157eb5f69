"""
Membership tests for the invariant cones and their explicit constants.

C1 holds the nonnegative densities that are nonincreasing while x^(alpha+1) f
is nondecreasing. C2 adds the bound f(x) <= a x^(-alpha) m(f), which in the
regularized coordinates reads h(x) <= a m(f).
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .density import ConeDensity, mass
from .errors import DomainError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
MAX_REPORTED = 10


def a_min(alpha: float) -> float:
    """Smallest admissible cone constant, 2^alpha (2 + alpha) / (1 - alpha)."""
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must satisfy 0 < alpha < 1, got {alpha}")
    return 2.0 ** alpha * (2.0 + alpha) / (1.0 - alpha)


def _c3(alpha: float, a: float) -> float:
    return min(a, (alpha * (1.0 + alpha) / a ** alpha) ** (1.0 / (1.0 - alpha)))


@dataclass(frozen=True)
class ConeParams:
    """
    Cone constants (alpha, a) with the derived lower bound c3.

    Attributes:
        alpha: Family exponent cap
        a: Cone constant, at least a_min(alpha); defaults to a_min(alpha)
    """
    alpha: float
    a: Optional[float] = None

    def __post_init__(self):
        floor = a_min(self.alpha)
        if self.a is None:
            object.__setattr__(self, "a", floor)
        elif self.a < floor * (1.0 - 1e-12):
            raise DomainError(f"cone constant a={self.a} below a_min({self.alpha})={floor:.6g}")

    @property
    def c3(self) -> float:
        return _c3(self.alpha, self.a)


def c3_bound(cone: ConeParams) -> float:
    """min{a, [alpha(1 + alpha) / a^alpha]^(1/(1 - alpha))}, logging the active branch."""
    power = (cone.alpha * (1.0 + cone.alpha) / cone.a ** cone.alpha) ** (1.0 / (1.0 - cone.alpha))
    branch = "a" if cone.a <= power else "power"
    logger.debug(f"c3 for alpha={cone.alpha}, a={cone.a:.6g}: active branch '{branch}'")
    return min(cone.a, power)


# =============================================================================
# Violation reports
# =============================================================================

@dataclass
class Violation:
    """One failed node check."""
    check: str
    node_index: int
    x: float
    magnitude: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ConeReport:
    """
    Result of a membership check.

    Truthiness is the membership verdict; violations holds the worst failures
    of each condition.
    """
    ok: bool
    violations: List[Violation] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok

    def to_dicts(self) -> List[Dict[str, Any]]:
        return [v.to_dict() for v in self.violations]

    def to_json(self) -> str:
        return json.dumps(self.to_dicts(), indent=2)


def _worst(check: str, excess: np.ndarray, index: np.ndarray, x: np.ndarray) -> List[Violation]:
    bad = np.flatnonzero(excess > 0.0)
    if bad.size == 0:
        return []
    order = bad[np.argsort(-excess[bad], kind="stable")][:MAX_REPORTED]
    return [Violation(check, int(index[j]), float(x[j]), float(excess[j])) for j in order]


def _c1_violations(f: ConeDensity, tol: float) -> List[Violation]:
    mesh = f.mesh
    x = mesh.nodes
    h = f.hvals
    fv = h[1:] / mesh.u[1:]
    nodes = np.arange(1, mesh.n_cells + 1)

    violations = _worst("nonnegative", -h - tol, np.arange(mesh.n_cells + 1), x)

    # f nonincreasing between adjacent interior nodes
    rise = fv[1:] - fv[:-1]
    violations += _worst(
        "decreasing", rise - tol * np.maximum(1.0, np.abs(fv[:-1])), nodes[:-1], x[1:-1]
    )

    # x^(alpha+1) f = x h nondecreasing, including the pair (0, x_1)
    g = x * h
    drop = g[:-1] - g[1:]
    violations += _worst(
        "x_pow_increasing",
        drop - tol * np.maximum(1.0, np.abs(g[1:])),
        np.arange(mesh.n_cells),
        x[:-1],
    )
    return violations


def is_in_C1(f: ConeDensity, tol: float = DEFAULT_TOL) -> ConeReport:
    """
    Check the C1 conditions at all adjacent node pairs.

    Tolerances are relative to max(1, local magnitude).

    Returns:
        ConeReport, truthy when f passes
    """
    violations = _c1_violations(f, tol)
    return ConeReport(ok=not violations, violations=violations)


def is_in_C2(
    f: ConeDensity,
    cone: ConeParams,
    tol: float = DEFAULT_TOL,
    mass_value: Optional[float] = None,
) -> ConeReport:
    """
    Check C1 and the bound h(x) <= a m(f) at all nodes.

    Args:
        f: Density to check
        cone: Cone constants
        tol: Relative tolerance
        mass_value: Mass to use in the bound instead of m(f)

    Returns:
        ConeReport, truthy when f passes
    """
    if f.mesh.alpha != cone.alpha:
        raise DomainError(f"density alpha={f.mesh.alpha} differs from cone alpha={cone.alpha}")
    violations = _c1_violations(f, tol)
    m = mass(f) if mass_value is None else mass_value
    bound = cone.a * m
    excess = f.hvals - bound - tol * max(1.0, abs(bound))
    violations += _worst("upper_bound", excess, np.arange(f.mesh.n_cells + 1), f.mesh.nodes)
    return ConeReport(ok=not violations, violations=violations)


def lower_bound_gap(f: ConeDensity, cone: ConeParams) -> float:
    """f(1) - c3 m(f); nonnegative for every member of C2."""
    return float(f.hvals[-1]) - c3_bound(cone) * mass(f)
