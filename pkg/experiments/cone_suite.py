"""
Randomized checks of cone invariance and of the uniform lower bound.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from core.cones import ConeParams, c3_bound, is_in_C1, is_in_C2
from core.density import ConeDensity, GradedMesh, sample_cone_density
from core.maps import MapSequence, Policy
from core.transfer import iterate_push, pf_grid_step

logger = logging.getLogger(__name__)

INVARIANCE_TOL = 1e-6


@dataclass
class ConeSuiteResult:
    """Outcome of pushing random cone members one step."""
    samples: int
    failures: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return sum(len(f["violations"]) for f in self.failures)


def cone_invariance_suite(
    alpha: float,
    seed: int,
    samples: int,
    mesh: Optional[GradedMesh] = None,
    cone: Optional[ConeParams] = None,
    tol: float = INVARIANCE_TOL,
) -> ConeSuiteResult:
    """Push `samples` random (beta, f in C2) pairs one step and re-check C1 and C2."""
    mesh = mesh or GradedMesh(alpha)
    cone = cone or ConeParams(alpha)
    rng = np.random.default_rng(seed)
    result = ConeSuiteResult(samples=samples)
    for k in range(samples):
        beta = alpha - alpha * float(rng.random())
        f = sample_cone_density(int(rng.integers(2 ** 31)), cone, mesh)
        pushed = pf_grid_step(beta, f)
        violations = is_in_C1(pushed, tol).to_dicts() + is_in_C2(pushed, cone, tol).to_dicts()
        if violations:
            result.failures.append({"sample": k, "beta": beta, "violations": violations})
    logger.info(f"Cone invariance: {len(result.failures)} of {samples} samples failed")
    return result


@dataclass
class LowerBoundScan:
    """Smallest value of P_1^m 1 over nodes, steps and sequences, against c3."""
    minimum: float
    c3: float
    per_seed: List[float]

    @property
    def gap(self) -> float:
        return self.minimum - self.c3


def lower_bound_scan(
    alpha: float,
    seeds: Sequence[int],
    m_max: int,
    mesh: Optional[GradedMesh] = None,
    cone: Optional[ConeParams] = None,
) -> LowerBoundScan:
    """Track min over nodes of P_1^m 1 for m <= m_max on random sequences."""
    mesh = mesh or GradedMesh(alpha)
    cone = cone or ConeParams(alpha)
    one = ConeDensity.constant(mesh)
    per_seed = []
    for seed in seeds:
        sequence = MapSequence.generate(alpha, Policy.UNIFORM, m_max, seed=seed)
        lowest = np.inf
        for _, (pushed,) in iterate_push(sequence, [one], m_max):
            lowest = min(lowest, float(np.min(pushed.hvals[1:] / mesh.u[1:])))
        per_seed.append(lowest)
    scan = LowerBoundScan(minimum=min(per_seed), c3=c3_bound(cone), per_seed=per_seed)
    logger.info(f"Lower bound: min P_1^m 1 = {scan.minimum:.6g} vs c3 = {scan.c3:.6g}")
    return scan
