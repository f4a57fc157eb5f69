"""
Densities with an x^(-alpha) singularity at the neutral fixed point.

A density f is stored on a power-graded mesh through its regularized values
h = x^alpha * f at the nodes. Inside each cell h is linear in u = x^alpha, so
on every cell f = A + B * x^(-alpha). Constants and x^(-alpha) are therefore
represented exactly and every cell integral has a closed form.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import roots_legendre

from .errors import DomainError, MeshMismatchError

if TYPE_CHECKING:
    from .cones import ConeParams

logger = logging.getLogger(__name__)

DEFAULT_CELLS = 2 ** 14
QUADRATURE_ORDER = 8
# Below this relative cell width the binomial excess is summed as a series
_SERIES_CUTOFF = 0.05
_SERIES_TERMS = 14


# =============================================================================
# Closed-form cell integrals
# =============================================================================

def _binomial_excess(s: float, r: np.ndarray) -> np.ndarray:
    """(1 + r)^s - 1 - s*r, accurate for small r."""
    r = np.asarray(r, dtype=float)
    out = np.expm1(s * np.log1p(r)) - s * r
    small = r < _SERIES_CUTOFF
    if np.any(small):
        rs = r[small]
        term = 0.5 * s * (s - 1.0) * rs * rs
        total = term.copy()
        for k in range(3, _SERIES_TERMS + 1):
            term = term * (s - k + 1.0) / k * rs
            total += term
        out[small] = total
    return out


def cell_weights(xa: np.ndarray, xb: np.ndarray, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Integration weights of a cell [xa, xb] for h linear in u = x^alpha.

    For h with endpoint values ha and hb,
    integral over [xa, xb] of x^(-alpha) h(x) dx = ha * wl + hb * wr.

    Args:
        xa: Left endpoints (may contain 0)
        xb: Right endpoints, xb >= xa
        alpha: Singularity exponent

    Returns:
        (wl, wr) arrays, both nonnegative
    """
    xa = np.atleast_1d(np.asarray(xa, dtype=float))
    xb = np.atleast_1d(np.asarray(xb, dtype=float))
    one_m = 1.0 - alpha
    wl = np.zeros_like(xb)
    wr = np.zeros_like(xb)

    origin = (xa == 0.0) & (xb > 0.0)
    if np.any(origin):
        scale = xb[origin] ** one_m
        wl[origin] = alpha / one_m * scale
        wr[origin] = scale

    inner = (xa > 0.0) & (xb > xa)
    if np.any(inner):
        a = xa[inner]
        r = (xb[inner] - a) / a
        grow = np.expm1(alpha * np.log1p(r))
        scale = -(a ** one_m) / (one_m * grow)
        wl[inner] = scale * _binomial_excess(alpha, r)
        wr[inner] = scale * _binomial_excess(one_m, r)
    return wl, wr


# =============================================================================
# Mesh
# =============================================================================

@dataclass(frozen=True)
class GradedMesh:
    """
    Power-graded partition x_i = (i/N)^p of [0, 1].

    Attributes:
        alpha: Singularity exponent of the densities stored on the mesh
        n_cells: Number of cells N
        grading: Grading exponent p >= 1/(1 - alpha)
    """
    alpha: float
    n_cells: int = DEFAULT_CELLS
    grading: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise DomainError(f"alpha must satisfy 0 < alpha < 1, got {self.alpha}")
        if self.n_cells < 1:
            raise DomainError(f"mesh needs at least one cell, got {self.n_cells}")
        if self.grading is None:
            object.__setattr__(self, "grading", 2.0 / (1.0 - self.alpha))
        threshold = 1.0 / (1.0 - self.alpha)
        if self.grading < threshold - 1e-12:
            raise DomainError(
                f"grading {self.grading} below the integrability threshold {threshold:.6g}"
            )

    @cached_property
    def nodes(self) -> np.ndarray:
        x = (np.arange(self.n_cells + 1, dtype=float) / self.n_cells) ** self.grading
        x[0] = 0.0
        x[-1] = 1.0
        x.setflags(write=False)
        return x

    @cached_property
    def u(self) -> np.ndarray:
        """Nodes in the interpolation variable u = x^alpha."""
        u = self.nodes ** self.alpha
        u.setflags(write=False)
        return u

    @cached_property
    def weights(self) -> Tuple[np.ndarray, np.ndarray]:
        wl, wr = cell_weights(self.nodes[:-1], self.nodes[1:], self.alpha)
        wl.setflags(write=False)
        wr.setflags(write=False)
        return wl, wr

    @cached_property
    def mass_weights(self) -> np.ndarray:
        """Row vector w with m(f) = w . h."""
        wl, wr = self.weights
        w = np.zeros(self.n_cells + 1)
        w[:-1] += wl
        w[1:] += wr
        w.setflags(write=False)
        return w

    @cached_property
    def cell_widths(self) -> np.ndarray:
        widths = np.diff(self.nodes)
        widths.setflags(write=False)
        return widths

    @cached_property
    def dual_edges(self) -> np.ndarray:
        """Edges of the dual cells around each node (midpoints, clamped to [0, 1])."""
        x = self.nodes
        edges = np.concatenate(([0.0], 0.5 * (x[:-1] + x[1:]), [1.0]))
        edges.setflags(write=False)
        return edges

    def locate(self, x: np.ndarray) -> np.ndarray:
        """Index i of the cell [x_i, x_(i+1)] holding each point."""
        idx = np.searchsorted(self.nodes, x, side="right") - 1
        return np.clip(idx, 0, self.n_cells - 1)

    def spec(self) -> dict:
        return {"n_cells": self.n_cells, "grading": self.grading}


# =============================================================================
# Densities
# =============================================================================

@dataclass(frozen=True, eq=False)
class ConeDensity:
    """
    A density f = x^(-alpha) h on a graded mesh.

    Attributes:
        mesh: Mesh the values live on
        hvals: h_i = x_i^alpha f(x_i) at every node; hvals[0] is the limit at 0
    """
    mesh: GradedMesh
    hvals: np.ndarray

    def __post_init__(self):
        h = np.array(self.hvals, dtype=float)
        if h.shape != (self.mesh.n_cells + 1,):
            raise MeshMismatchError(
                f"expected {self.mesh.n_cells + 1} node values, got {h.shape}"
            )
        if not np.all(np.isfinite(h)):
            raise DomainError("density values must be finite")
        h.setflags(write=False)
        object.__setattr__(self, "hvals", h)

    # ---- constructors -------------------------------------------------------

    @classmethod
    def from_function(
        cls,
        mesh: GradedMesh,
        func: Callable[[np.ndarray], np.ndarray],
        h0: float = 0.0,
    ) -> "ConeDensity":
        """Sample f at the interior nodes; h0 is the limit of x^alpha f at 0."""
        x = mesh.nodes[1:]
        h = np.empty(mesh.n_cells + 1)
        h[0] = h0
        h[1:] = mesh.u[1:] * np.asarray(func(x), dtype=float)
        return cls(mesh, h)

    @classmethod
    def constant(cls, mesh: GradedMesh, value: float = 1.0) -> "ConeDensity":
        return cls(mesh, value * mesh.u)

    @classmethod
    def zero(cls, mesh: GradedMesh) -> "ConeDensity":
        return cls(mesh, np.zeros(mesh.n_cells + 1))

    @classmethod
    def power(cls, mesh: GradedMesh, theta: float) -> "ConeDensity":
        """
        The density (1 - theta) x^(-theta), 0 <= theta <= alpha.

        Only theta = 0 and theta = alpha are exact on the mesh, so the node
        values are rescaled to unit quadrature mass.
        """
        if not (0.0 <= theta <= mesh.alpha):
            raise DomainError(f"theta must lie in [0, alpha={mesh.alpha}], got {theta}")
        h = (1.0 - theta) * mesh.nodes ** (mesh.alpha - theta)
        h[0] = (1.0 - theta) if theta == mesh.alpha else 0.0
        return cls(mesh, h / mass(cls(mesh, h)))

    # ---- evaluation ---------------------------------------------------------

    def h_at(self, x: np.ndarray) -> np.ndarray:
        """Interpolate h at arbitrary points of [0, 1]."""
        x = np.asarray(x, dtype=float)
        mesh = self.mesh
        i = mesh.locate(x)
        u = mesh.u
        t = (x ** mesh.alpha - u[i]) / (u[i + 1] - u[i])
        return self.hvals[i] + t * (self.hvals[i + 1] - self.hvals[i])

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """
        Evaluate f at arbitrary points.

        At x = 0 the value is +inf when h(0) > 0, otherwise the finite limit
        of f, which is the slope of h in u on the first cell.
        """
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        pos = x > 0.0
        out[pos] = self.h_at(x[pos]) / x[pos] ** self.mesh.alpha
        if np.any(~pos):
            h0 = self.hvals[0]
            out[~pos] = np.inf if h0 > 0.0 else (self.hvals[1] - h0) / self.mesh.u[1]
        return float(out[0]) if scalar else out

    @property
    def fvals(self) -> np.ndarray:
        """f at the nodes, using the convention of evaluate at x = 0."""
        return self.evaluate(self.mesh.nodes)

    @property
    def alpha(self) -> float:
        return self.mesh.alpha

    # ---- arithmetic ---------------------------------------------------------

    def _check_mesh(self, other: "ConeDensity") -> None:
        if other.mesh != self.mesh:
            raise MeshMismatchError("densities live on different meshes")

    def __add__(self, other: "ConeDensity") -> "ConeDensity":
        self._check_mesh(other)
        return ConeDensity(self.mesh, self.hvals + other.hvals)

    def __sub__(self, other: "ConeDensity") -> "ConeDensity":
        self._check_mesh(other)
        return ConeDensity(self.mesh, self.hvals - other.hvals)

    def __mul__(self, scale: float) -> "ConeDensity":
        return ConeDensity(self.mesh, float(scale) * self.hvals)

    __rmul__ = __mul__

    def rows(self) -> List[Tuple[float, float, float]]:
        """(x, h, f) per node for CSV export."""
        return list(zip(self.mesh.nodes.tolist(), self.hvals.tolist(), self.fvals.tolist()))


@dataclass(frozen=True)
class C1Observable:
    """
    A C^1 function on [0, 1] with bounds on its sup norm and derivative.

    Attributes:
        func: Vectorized evaluation callback
        sup_norm: Upper bound on |psi|
        deriv_sup_norm: Upper bound on |psi'|
        name: Label used in reports
    """
    func: Callable[[np.ndarray], np.ndarray]
    sup_norm: float
    deriv_sup_norm: float
    name: str = "observable"

    @classmethod
    def from_function(
        cls,
        func: Callable[[np.ndarray], np.ndarray],
        deriv: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        name: str = "observable",
        grid_size: int = 10 ** 4,
    ) -> "C1Observable":
        """Measure the norms on a uniform grid; the derivative is differenced if not given."""
        grid = np.linspace(0.0, 1.0, grid_size + 1)
        values = np.asarray(func(grid), dtype=float) * np.ones_like(grid)
        if deriv is not None:
            slopes = np.asarray(deriv(grid), dtype=float) * np.ones_like(grid)
        else:
            slopes = np.gradient(values, grid)
        return cls(
            func=func,
            sup_norm=float(np.max(np.abs(values))),
            deriv_sup_norm=float(np.max(np.abs(slopes))),
            name=name,
        )

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.func(x), dtype=float) * np.ones_like(x)


# =============================================================================
# Quadrature
# =============================================================================

def mass(f: ConeDensity) -> float:
    """Exact integral of f over [0, 1]."""
    wl, wr = f.mesh.weights
    h = f.hvals
    return math.fsum((h[:-1] * wl + h[1:] * wr).tolist())


def _cell_masses(f: ConeDensity) -> np.ndarray:
    wl, wr = f.mesh.weights
    return f.hvals[:-1] * wl + f.hvals[1:] * wr


def cell_averages(f: ConeDensity) -> np.ndarray:
    """Mean of f over each cell."""
    return _cell_masses(f) / f.mesh.cell_widths


def l1_distance(f: ConeDensity, g: ConeDensity) -> float:
    """
    Integral of |f - g| over [0, 1].

    Inside a cell where h_f - h_g changes sign the crossing is located on the
    linear-in-u interpolant and both pieces are integrated in closed form.

    Raises:
        MeshMismatchError: f and g live on different meshes
    """
    if f.mesh != g.mesh:
        raise MeshMismatchError("l1_distance needs densities on the same mesh")
    return _abs_integral(f.mesh, f.hvals - g.hvals)


def l1_norm(f: ConeDensity) -> float:
    return _abs_integral(f.mesh, f.hvals)


def _abs_integral(mesh: GradedMesh, d: np.ndarray) -> float:
    wl, wr = mesh.weights
    left, right = d[:-1], d[1:]
    parts = np.abs(left) * wl + np.abs(right) * wr
    cross = (left * right) < 0.0
    if np.any(cross):
        idx = np.flatnonzero(cross)
        dl, dr = left[idx], right[idx]
        u, x = mesh.u, mesh.nodes
        u_star = u[idx] + dl / (dl - dr) * (u[idx + 1] - u[idx])
        x_star = np.clip(u_star ** (1.0 / mesh.alpha), x[idx], x[idx + 1])
        wl_a, _ = cell_weights(x[idx], x_star, mesh.alpha)
        _, wr_b = cell_weights(x_star, x[idx + 1], mesh.alpha)
        parts[idx] = np.abs(dl) * wl_a + np.abs(dr) * wr_b
    return math.fsum(parts.tolist())


def cumulative(f: ConeDensity, x: np.ndarray) -> np.ndarray:
    """F(x) = integral of f over [0, x] for points of [0, 1]."""
    x = np.asarray(x, dtype=float)
    mesh = f.mesh
    prefix = np.concatenate(([0.0], np.cumsum(_cell_masses(f))))
    i = mesh.locate(x)
    wl, wr = cell_weights(mesh.nodes[i], x, mesh.alpha)
    return prefix[i] + f.hvals[i] * wl + f.h_at(x) * wr


def integrate_against(
    f: ConeDensity,
    obs: Callable[[np.ndarray], np.ndarray],
    order: int = QUADRATURE_ORDER,
) -> float:
    """
    Integral of obs * f by per-cell Gauss-Legendre in s = x^(1 - alpha).

    The substitution absorbs the x^(-alpha) weight: f dx = h ds / (1 - alpha).
    """
    mesh = f.mesh
    one_m = 1.0 - mesh.alpha
    points, qweights = roots_legendre(order)
    s = mesh.nodes ** one_m
    mid = 0.5 * (s[:-1] + s[1:])
    half = 0.5 * (s[1:] - s[:-1])
    sq = mid[:, None] + half[:, None] * points[None, :]
    xq = np.clip(sq, 0.0, 1.0) ** (1.0 / one_m)

    i = np.repeat(np.arange(mesh.n_cells), order).reshape(mesh.n_cells, order)
    u = mesh.u
    t = (xq ** mesh.alpha - u[i]) / (u[i + 1] - u[i])
    hq = f.hvals[i] + t * (f.hvals[i + 1] - f.hvals[i])
    vq = np.asarray(obs(xq.ravel()), dtype=float).reshape(xq.shape) * np.ones_like(xq)
    cells = (hq * vq) @ qweights * half / one_m
    return math.fsum(cells.tolist())


# =============================================================================
# Operators on densities
# =============================================================================

def average_op(f: ConeDensity, eps: float) -> ConeDensity:
    """
    Local average A_eps f(x) = (F(x + eps) - F(x - eps)) / (2 eps) on the circle.

    Args:
        f: Density to average
        eps: Half-width of the window, 0 < eps < 1/2

    Returns:
        Node-sampled average with the mass of f
    """
    if not (0.0 < eps < 0.5):
        raise DomainError(f"eps must lie in (0, 1/2), got {eps}")
    mesh = f.mesh
    total = mass(f)
    x = mesh.nodes[1:]

    def periodic(y: np.ndarray) -> np.ndarray:
        turns = np.floor(y)
        return cumulative(f, y - turns) + turns * total

    avg = (periodic(x + eps) - periodic(x - eps)) / (2.0 * eps)
    h = np.empty(mesh.n_cells + 1)
    h[0] = 0.0
    h[1:] = np.maximum(avg, 0.0) * mesh.u[1:]
    out = ConeDensity(mesh, h)
    out_mass = mass(out)
    if out_mass > 0.0 and total != 0.0:
        out = out * (total / out_mass)
    return out


def indicator(mesh: GradedMesh, lo: float, hi: float) -> ConeDensity:
    """
    Indicator of the circular arc [lo, hi) built from dual-cell overlaps.

    The node value is the fraction of the node's dual cell covered by the
    arc; the result is scaled to carry exactly the arc length as mass.
    """
    length = hi - lo
    if not (0.0 < length <= 1.0):
        raise DomainError(f"arc [{lo}, {hi}) must have length in (0, 1]")
    edges = mesh.dual_edges
    width = np.diff(edges)
    lo = lo % 1.0
    pieces = [(lo, min(lo + length, 1.0))]
    if lo + length > 1.0:
        pieces.append((0.0, lo + length - 1.0))
    covered = np.zeros_like(width)
    for a, b in pieces:
        covered += np.clip(np.minimum(edges[1:], b) - np.maximum(edges[:-1], a), 0.0, None)
    frac = np.divide(covered, width, out=np.zeros_like(width), where=width > 0.0)
    h = frac * mesh.u
    h[0] = 0.0
    out = ConeDensity(mesh, h)
    out_mass = mass(out)
    if out_mass <= 0.0:
        raise DomainError(f"arc [{lo}, {lo + length}) is not resolved by the mesh")
    return out * (length / out_mass)


def shift_constants(sup_norm: float, deriv_sup_norm: float, cone: "ConeParams") -> Tuple[float, float]:
    """Slope lambda and offset nu that move a C^1 function into the cone C2."""
    alpha, a = cone.alpha, cone.a
    lam = -deriv_sup_norm - 1.0
    first = ((1.0 + alpha) * sup_norm + deriv_sup_norm - lam * (2.0 + alpha)) / (1.0 + alpha)
    second = (1.0 + a) / (a - 1.0) * sup_norm - a * lam / (2.0 * (a - 1.0))
    return lam, max(first, second) + 1.0


def _shifted(mesh: GradedMesh, psi: C1Observable, lam: float, nu: float) -> ConeDensity:
    return ConeDensity.from_function(mesh, lambda x: psi(x) + lam * x + nu)


def c1_shift(
    psi: C1Observable,
    cone: "ConeParams",
    mesh: Optional[GradedMesh] = None,
) -> Tuple[ConeDensity, float, float]:
    """
    Discretize psi + lambda*x + nu, which lies in C2.

    lambda = -|psi'|_inf - 1 and nu exceeds the larger of the two offsets the
    cone requires by 1, so (lambda, nu) depend affinely on the C^1 norm.

    Returns:
        (density, lambda, nu)
    """
    mesh = mesh or GradedMesh(cone.alpha)
    lam, nu = shift_constants(psi.sup_norm, psi.deriv_sup_norm, cone)
    logger.debug(f"C1 shift of {psi.name}: lambda={lam:.6g}, nu={nu:.6g}")
    return _shifted(mesh, psi, lam, nu), lam, nu


def shift_pair(
    phi: C1Observable,
    psi: C1Observable,
    cone: "ConeParams",
    mesh: Optional[GradedMesh] = None,
) -> Tuple[ConeDensity, ConeDensity, float, float]:
    """Shift two observables with one (lambda, nu) so equal expectations stay equal."""
    mesh = mesh or GradedMesh(cone.alpha)
    lam, nu = shift_constants(
        max(phi.sup_norm, psi.sup_norm),
        max(phi.deriv_sup_norm, psi.deriv_sup_norm),
        cone,
    )
    return _shifted(mesh, phi, lam, nu), _shifted(mesh, psi, lam, nu), lam, nu


def mixture(
    mesh: GradedMesh,
    thetas: Sequence[float],
    weights: Sequence[float],
    constant_weight: float = 0.0,
) -> ConeDensity:
    """Combination constant_weight * 1 + sum_j w_j (1 - theta_j) x^(-theta_j)."""
    if len(thetas) != len(weights):
        raise DomainError("thetas and weights must have the same length")
    h = constant_weight * mesh.u
    for theta, weight in zip(thetas, weights):
        h = h + weight * ConeDensity.power(mesh, theta).hvals
    return ConeDensity(mesh, h)


def sample_cone_density(
    seed: int,
    cone: "ConeParams",
    mesh: Optional[GradedMesh] = None,
    thetas: Optional[Sequence[float]] = None,
    max_components: int = 3,
) -> ConeDensity:
    """
    Random unit-mass member of C2.

    A random convex combination of 1 and densities (1 - theta)x^(-theta) with
    0 < theta <= alpha, deterministic in seed. Passing thetas fixes the power
    components and drops the constant one.
    """
    mesh = mesh or GradedMesh(cone.alpha)
    rng = np.random.default_rng(seed)
    alpha = mesh.alpha
    if thetas is None:
        count = int(rng.integers(1, max_components + 1))
        thetas = (alpha - alpha * rng.random(count)).tolist()
        weights = rng.dirichlet(np.ones(count + 1))
        f = mixture(mesh, thetas, weights[1:].tolist(), constant_weight=float(weights[0]))
    else:
        weights = rng.dirichlet(np.ones(len(thetas))) if len(thetas) > 1 else np.ones(1)
        f = mixture(mesh, list(thetas), weights.tolist())
    return f * (1.0 / mass(f))
