"""
Numerical engine of pmlab.

This package contains the core components:
- maps: the Pomeau-Manneville family, map sequences, preimage ladders, arcs
- density: graded meshes, cone densities, quadrature and averaging
- transfer: collocation and Ulam transfer operators, kernels, exact oracle
- cones: cone membership checks and the constants a_min and c3
- errors: the LabError hierarchy
"""

from .cones import ConeParams, ConeReport, a_min, c3_bound, is_in_C1, is_in_C2
from .density import (
    C1Observable,
    ConeDensity,
    GradedMesh,
    average_op,
    c1_shift,
    l1_distance,
    mass,
)
from .errors import LabError
from .maps import (
    ArcSet,
    MapSequence,
    Policy,
    eval_deriv,
    eval_map,
    invert_branch,
    preimage_ladder,
    push_arc,
)
from .transfer import (
    kernel_estimate,
    pf_exact_seq,
    pf_grid_step,
    perturbed_apply,
    sequential_push,
    ulam_push,
)

__all__ = [
    "ArcSet",
    "C1Observable",
    "ConeDensity",
    "ConeParams",
    "ConeReport",
    "GradedMesh",
    "LabError",
    "MapSequence",
    "Policy",
    "a_min",
    "average_op",
    "c1_shift",
    "c3_bound",
    "eval_deriv",
    "eval_map",
    "invert_branch",
    "is_in_C1",
    "is_in_C2",
    "kernel_estimate",
    "l1_distance",
    "mass",
    "perturbed_apply",
    "pf_exact_seq",
    "pf_grid_step",
    "preimage_ladder",
    "push_arc",
    "sequential_push",
    "ulam_push",
]
