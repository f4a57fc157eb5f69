"""
Parsing of observable specifications used by the commands.

Density specs:
    one             the constant density 1
    power:<theta>   (1 - theta) x^(-theta), 0 <= theta <= alpha
    sample:<seed>   a random unit-mass member of C2

C^1 observable specs (shifted into C2 when used as densities):
    sin:<amp>       amp * sin(2 pi x)
    cos:<amp>       amp * cos(2 pi x)
    identity        x
"""

import logging
from typing import Tuple

import numpy as np

from core.cones import ConeParams
from core.density import (
    C1Observable,
    ConeDensity,
    GradedMesh,
    c1_shift,
    sample_cone_density,
    shift_pair,
)
from core.errors import ConfigError

logger = logging.getLogger(__name__)

DENSITY_KINDS = ("one", "power", "sample")
C1_KINDS = ("sin", "cos", "identity")


def _split(spec: str) -> Tuple[str, str]:
    kind, _, arg = spec.strip().partition(":")
    return kind.lower(), arg


def is_c1_spec(spec: str) -> bool:
    return _split(spec)[0] in C1_KINDS


def parse_c1(spec: str) -> C1Observable:
    """Build a C1Observable from its spec."""
    kind, arg = _split(spec)
    try:
        amp = float(arg) if arg else 1.0
    except ValueError:
        raise ConfigError(f"bad amplitude in observable '{spec}'", field="observable") from None
    two_pi = 2.0 * np.pi
    if kind == "sin":
        return C1Observable(lambda x: amp * np.sin(two_pi * x), abs(amp), abs(amp) * two_pi, spec)
    if kind == "cos":
        return C1Observable(lambda x: amp * np.cos(two_pi * x), abs(amp), abs(amp) * two_pi, spec)
    if kind == "identity":
        return C1Observable(lambda x: np.asarray(x, dtype=float), 1.0, 1.0, spec)
    raise ConfigError(f"unknown observable '{spec}'", field="observable")


def parse_density(spec: str, mesh: GradedMesh, cone: ConeParams) -> ConeDensity:
    """Build a cone density from a density spec."""
    kind, arg = _split(spec)
    try:
        if kind == "one":
            return ConeDensity.constant(mesh)
        if kind == "power":
            theta = float(arg) if arg else mesh.alpha / 2.0
            return ConeDensity.power(mesh, theta)
        if kind == "sample":
            return sample_cone_density(int(arg or 0), cone, mesh)
    except ValueError as e:
        raise ConfigError(f"bad density '{spec}': {e}", field="observable") from None
    raise ConfigError(f"unknown density '{spec}'", field="observable")


def parse_pair(
    phi_spec: str,
    psi_spec: str,
    mesh: GradedMesh,
    cone: ConeParams,
) -> Tuple[ConeDensity, ConeDensity]:
    """
    Resolve the two initial densities of a memory-loss run.

    Two C^1 specs are shifted with one common (lambda, nu); their masses then
    differ by the difference of their means, which is zero for the sin/cos
    family.
    """
    c1_phi, c1_psi = is_c1_spec(phi_spec), is_c1_spec(psi_spec)
    if c1_phi and c1_psi:
        phi, psi, lam, nu = shift_pair(parse_c1(phi_spec), parse_c1(psi_spec), cone, mesh)
        logger.info(f"Shifted C1 observables with lambda={lam:.6g}, nu={nu:.6g}")
        return phi, psi
    if c1_phi or c1_psi:
        raise ConfigError("phi and psi must both be densities or both be C1 observables",
                          field="observable")
    return parse_density(phi_spec, mesh, cone), parse_density(psi_spec, mesh, cone)


def parse_initial(spec: str, mesh: GradedMesh, cone: ConeParams) -> ConeDensity:
    """Resolve one initial density; a C^1 spec is shifted into C2 on its own."""
    if is_c1_spec(spec):
        density, lam, nu = c1_shift(parse_c1(spec), cone, mesh)
        logger.info(f"Shifted {spec} with lambda={lam:.6g}, nu={nu:.6g}")
        return density
    return parse_density(spec, mesh, cone)
