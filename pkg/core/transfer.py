"""
Transfer operators of the map family.

Three independent backends compute P_beta f(x) = sum over preimages y of
f(y) / T_beta'(y):

- pf_point / pf_exact_seq: exact pullback sums over the preimage tree (oracle)
- pf_grid_step: collocation of the pullback at the mesh nodes (primary engine)
- build_ulam: Ulam cell-to-cell Markov matrix (validation backend)

On top of these sit the perturbed operator P_m^(n_eps) A_eps and the kernel
estimate used for the uniform positivity property.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from .density import (
    ConeDensity,
    GradedMesh,
    average_op,
    cell_averages,
    indicator,
    l1_distance,
)
from .errors import DepthLimitError, DomainError, MeshMismatchError, SequenceExhaustedError
from .maps import BRANCH_POINT, MapSequence, eval_deriv, invert_branch

logger = logging.getLogger(__name__)

MAX_EXACT_DEPTH = 22
DEFAULT_C_COV = 3.0

Evaluable = Union[ConeDensity, Callable[[np.ndarray], np.ndarray]]
Betas = Union[MapSequence, Sequence[float], np.ndarray]


def _as_callable(f: Evaluable) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(f, ConeDensity):
        return f.evaluate
    return f


def _beta_window(betas: Union[Betas, float], start: int, count: int) -> np.ndarray:
    """Exponents of maps start ... start + count - 1 (1-based)."""
    if isinstance(betas, MapSequence):
        return betas.window(start, count)
    if np.ndim(betas) == 0:
        return np.full(count, float(betas))
    arr = np.asarray(betas, dtype=float)
    if start < 1 or start + count - 1 > len(arr):
        raise SequenceExhaustedError(
            f"need maps {start}..{start + count - 1}, sequence has {len(arr)}"
        )
    return arr[start - 1:start - 1 + count]


# =============================================================================
# Exact oracle
# =============================================================================

def pf_point(beta: float, f: Evaluable, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """
    Exact transfer operator value f(y1)/T'(y1) + f(y2)/T'(y2).

    Args:
        beta: Map exponent
        f: Density or vectorized callable
        x: Point(s) in (0, 1]
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr > 1.0):
        raise DomainError("pf_point needs x in (0, 1]")
    func = _as_callable(f)
    y1 = np.asarray(invert_branch(beta, arr, "left"))
    y2 = (arr + 2.0) / 3.0
    value = np.asarray(func(y1)) / np.asarray(eval_deriv(beta, y1)) + np.asarray(func(y2)) / 3.0
    return float(value) if np.ndim(x) == 0 else value


def pf_exact_seq(betas: Union[Betas, float], f0: Evaluable, x: float, n: int) -> float:
    """
    (P_n o ... o P_1 f0)(x) summed over all 2^n inverse-branch words.

    Raises:
        DepthLimitError: n above MAX_EXACT_DEPTH
    """
    if n > MAX_EXACT_DEPTH:
        raise DepthLimitError(f"exact expansion limited to depth {MAX_EXACT_DEPTH}, got {n}")
    if n < 0:
        raise DomainError(f"depth must be nonnegative, got {n}")
    func = _as_callable(f0)
    if n == 0:
        return float(np.asarray(func(np.array([x])))[0])
    window = _beta_window(betas, 1, n)

    points = np.array([float(x)])
    weights = np.ones(1)
    for beta in window[::-1]:
        beta = float(beta)
        left = np.asarray(invert_branch(beta, points, "left"))
        right = (points + 2.0) / 3.0
        weights = np.concatenate((weights / np.asarray(eval_deriv(beta, left)), weights / 3.0))
        points = np.concatenate((left, right))
    return math.fsum((np.asarray(func(points)) * weights).tolist())


# =============================================================================
# Collocation engine
# =============================================================================

@lru_cache(maxsize=128)
def collocation_matrix(beta: float, mesh: GradedMesh) -> sparse.csr_matrix:
    """
    Sparse operator mapping node values h to the collocated h of P_beta f.

    Row j > 0 interpolates h at the two preimages of x_j:
    h_P(x_j) = (x_j/y1)^alpha h(y1) / T'(y1) + (x_j/y2)^alpha h(y2) / 3.
    Row 0 is the limit x -> 0, where the right-branch term carries
    x^alpha -> 0. For beta > 0, (x/y1)^alpha / T'(y1) -> 1 and h_P(0) = h(0);
    for beta = 0, y1 = 2x/3 and the factor is (3/2)^alpha / (3/2) = (2/3)^(1-alpha).
    """
    alpha = mesh.alpha
    origin = (2.0 / 3.0) ** (1.0 - alpha) if beta == 0.0 else 1.0
    x = mesh.nodes[1:]
    u = mesh.u
    y1 = np.asarray(invert_branch(beta, x, "left"))
    y2 = (x + 2.0) / 3.0

    coef_left = (x / y1) ** alpha / np.asarray(eval_deriv(beta, y1))
    coef_right = (x / y2) ** alpha / 3.0

    rows = [np.zeros(1, dtype=np.int64)]
    cols = [np.zeros(1, dtype=np.int64)]
    vals = [np.full(1, origin)]
    targets = np.arange(1, mesh.n_cells + 1)
    for y, coef in ((y1, coef_left), (y2, coef_right)):
        i = mesh.locate(y)
        t = (y ** alpha - u[i]) / (u[i + 1] - u[i])
        rows += [targets, targets]
        cols += [i, i + 1]
        vals += [coef * (1.0 - t), coef * t]
    n = mesh.n_cells + 1
    matrix = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return matrix.tocsr()


def _apply(beta: float, mesh: GradedMesh, h: np.ndarray, conserve: bool) -> np.ndarray:
    out = collocation_matrix(float(beta), mesh) @ h
    if conserve:
        w = mesh.mass_weights
        drift = w @ h - w @ out
        out = out + np.multiply.outer(mesh.u, drift) if out.ndim == 2 else out + drift * mesh.u
    return out


def pf_grid_step(beta: float, f: ConeDensity, conserve: bool = True) -> ConeDensity:
    """
    One collocated transfer-operator step.

    Args:
        beta: Map exponent
        f: Density on the mesh
        conserve: Add the linear correction (m(f) - m(P f)) * 1 so the mass is
            reproduced to rounding. The correction shifts every node by the
            quadrature defect times x^alpha; pointwise comparisons with
            pf_point use conserve=False

    Returns:
        P_beta f on the same mesh
    """
    return ConeDensity(f.mesh, _apply(beta, f.mesh, f.hvals, conserve))


def _stack(densities: Sequence[ConeDensity]) -> Tuple[GradedMesh, np.ndarray]:
    mesh = densities[0].mesh
    for f in densities[1:]:
        if f.mesh != mesh:
            raise MeshMismatchError("stacked densities must share one mesh")
    return mesh, np.column_stack([f.hvals for f in densities])


def iterate_push(
    betas: Union[Betas, float],
    densities: Sequence[ConeDensity],
    n: int,
    start: int = 1,
    conserve: bool = True,
) -> Iterator[Tuple[int, List[ConeDensity]]]:
    """
    Push several densities through the same maps, yielding after every step.

    Yields:
        (step, densities after `step` maps) for step = 1 ... n
    """
    mesh, h = _stack(densities)
    window = _beta_window(betas, start, n)
    for step, beta in enumerate(window, start=1):
        h = _apply(float(beta), mesh, h, conserve)
        yield step, [ConeDensity(mesh, h[:, k]) for k in range(h.shape[1])]


def sequential_push(
    betas: Union[Betas, float],
    f: ConeDensity,
    n: int,
    start: int = 1,
    conserve: bool = True,
) -> ConeDensity:
    """
    P_(start+n-1) o ... o P_start f by repeated collocation.

    Raises:
        SequenceExhaustedError: fewer than n maps from start
    """
    if n == 0:
        return f
    h = f.hvals
    for beta in _beta_window(betas, start, n):
        h = _apply(float(beta), f.mesh, h, conserve)
    return ConeDensity(f.mesh, h)


def evaluate_columns(mesh: GradedMesh, h: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate stacked densities (columns of h) at points x > 0; result is len(x) by k."""
    x = np.asarray(x, dtype=float)
    i = mesh.locate(x)
    t = (x ** mesh.alpha - mesh.u[i]) / (mesh.u[i + 1] - mesh.u[i])
    hx = h[i] * (1.0 - t)[:, None] + h[i + 1] * t[:, None]
    return hx / (x ** mesh.alpha)[:, None]


# =============================================================================
# Ulam backend
# =============================================================================

@dataclass(frozen=True, eq=False)
class UlamMatrix:
    """
    Row-stochastic Ulam matrix M[i, j] = m(C_i cap T^(-1) C_j) / m(C_i).

    Attributes:
        beta: Map exponent
        mesh: Cells C_i = [x_i, x_(i+1)]
        matrix: Sparse CSR matrix
    """
    beta: float
    mesh: GradedMesh
    matrix: sparse.csr_matrix

    def push(self, averages: np.ndarray) -> np.ndarray:
        """Transport cell averages one step."""
        widths = self.mesh.cell_widths
        return (self.matrix.T @ (averages * widths)) / widths

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def triplets(self) -> List[Tuple[int, int, float]]:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return list(zip(coo.row[order].tolist(), coo.col[order].tolist(), coo.data[order].tolist()))


def build_ulam(beta: float, mesh: GradedMesh) -> UlamMatrix:
    """
    Ulam matrix from the branch preimages of the cell endpoints.

    On each branch domain the cell edges and the preimages of all cell edges
    split the domain into segments that lie in one source cell and map into
    one target cell; each segment contributes its length fraction.
    """
    x = mesh.nodes
    rows, cols, vals = [], [], []
    for branch, lo, hi in (("left", 0.0, BRANCH_POINT), ("right", BRANCH_POINT, 1.0)):
        pre = np.asarray(invert_branch(beta, x, branch))
        own = x[(x > lo) & (x < hi)]
        cuts = np.unique(np.concatenate((pre, own, [lo, hi])))
        cuts = cuts[(cuts >= lo) & (cuts <= hi)]
        seg_lo, seg_hi = cuts[:-1], cuts[1:]
        keep = seg_hi > seg_lo
        seg_lo, seg_hi = seg_lo[keep], seg_hi[keep]
        mid = 0.5 * (seg_lo + seg_hi)
        source = mesh.locate(mid)
        target = np.clip(np.searchsorted(pre, mid, side="right") - 1, 0, mesh.n_cells - 1)
        rows.append(source)
        cols.append(target)
        vals.append((seg_hi - seg_lo) / mesh.cell_widths[source])
    n = mesh.n_cells
    matrix = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    logger.debug(f"Ulam matrix beta={beta}: {matrix.nnz} nonzeros on {n} cells")
    return UlamMatrix(beta=float(beta), mesh=mesh, matrix=matrix)


def ulam_push(betas: Union[Betas, float], f: ConeDensity, n: int, start: int = 1) -> np.ndarray:
    """Cell averages of f after n Ulam steps."""
    v = cell_averages(f)
    ulams: Dict[float, UlamMatrix] = {}
    for beta in _beta_window(betas, start, n):
        key = float(beta)
        if key not in ulams:
            if len(ulams) >= 8:
                ulams.clear()
            ulams[key] = build_ulam(key, f.mesh)
        v = ulams[key].push(v)
    return v


@dataclass
class StationaryResult:
    """Outcome of iterating one Ulam matrix to a fixed point."""
    averages: np.ndarray
    iterations: int
    residual: float
    converged: bool


def invariant_density(
    beta: float,
    mesh: GradedMesh,
    tol: float = 1e-10,
    max_iter: int = 5000,
) -> StationaryResult:
    """
    Cell averages of the invariant density, by repeated Ulam pushes of 1.

    Convergence is polynomial for beta > 0, so the result reports whether the
    L1 change between pushes fell below tol within max_iter.
    """
    ulam = build_ulam(beta, mesh)
    widths = mesh.cell_widths
    v = np.ones(mesh.n_cells)
    residual = math.inf
    for it in range(1, max_iter + 1):
        nxt = ulam.push(v)
        nxt /= float(nxt @ widths)
        residual = float(np.abs(nxt - v) @ widths)
        v = nxt
        if residual < tol:
            return StationaryResult(v, it, residual, True)
    logger.warning(f"Invariant density for beta={beta} not converged: residual {residual:.3g}")
    return StationaryResult(v, max_iter, residual, False)


# =============================================================================
# Perturbed operator and kernel
# =============================================================================

def default_n_eps(eps: float, alpha: float, c_cov: float = DEFAULT_C_COV) -> int:
    """ceil(C_cov * eps^(-alpha))."""
    return max(1, math.ceil(c_cov * eps ** (-alpha)))


@dataclass
class PerturbedResult:
    """Output of P_(eps,m) with the deviation from the unperturbed push."""
    density: ConeDensity
    n_eps: int
    deviation: float


def perturbed_apply(
    betas: Union[Betas, float],
    m: int,
    eps: float,
    f: ConeDensity,
    n_eps: Optional[int] = None,
    c_cov: float = DEFAULT_C_COV,
    conserve: bool = True,
) -> PerturbedResult:
    """
    P_(eps,m) f = P_m^(n_eps) A_eps f.

    Returns:
        PerturbedResult carrying |P_(eps,m) f - P_m^(n_eps) f|_1
    """
    if n_eps is None:
        n_eps = default_n_eps(eps, f.mesh.alpha, c_cov)
    averaged = average_op(f, eps)
    pushed = None
    plain = None
    for _, (pushed, plain) in iterate_push(betas, [averaged, f], n_eps, start=m, conserve=conserve):
        pass
    deviation = l1_distance(pushed, plain)
    logger.debug(f"Perturbed step eps={eps:.3g}, n_eps={n_eps}: deviation {deviation:.3g}")
    return PerturbedResult(density=pushed, n_eps=n_eps, deviation=deviation)


@dataclass
class KernelEstimate:
    """
    Samples of K_(eps,m)(x, z) = (1/2eps) P_m^(n_eps) 1_(B_eps(z))(x).

    values[k, l] is the kernel at z[k], x[l].
    """
    eps: float
    n_eps: int
    z: np.ndarray
    x: np.ndarray
    values: np.ndarray

    @property
    def gamma_hat(self) -> float:
        return float(self.values.min())

    def rows(self) -> List[Tuple[float, int, float, float, float]]:
        out = []
        for k, z in enumerate(self.z.tolist()):
            for j, x in enumerate(self.x.tolist()):
                out.append((self.eps, self.n_eps, z, x, float(self.values[k, j])))
        return out


def kernel_estimate(
    betas: Union[Betas, float],
    m: int,
    eps: float,
    n_eps: Optional[int] = None,
    z_points: int = 64,
    x_points: int = 64,
    mesh: Optional[GradedMesh] = None,
    c_cov: float = DEFAULT_C_COV,
) -> KernelEstimate:
    """
    Push the normalized indicators of B_eps(z) on a uniform z grid and sample
    them on a uniform x grid.

    Indicators use exact dual-cell overlaps; the pushes skip the mass
    correction so they stay positive.
    """
    if not (0.0 < eps < 0.25):
        raise DomainError(f"eps must lie in (0, 1/4), got {eps}")
    if mesh is None:
        alpha = betas.alpha if isinstance(betas, MapSequence) else None
        if alpha is None:
            raise DomainError("kernel_estimate needs a mesh when betas is not a MapSequence")
        mesh = GradedMesh(alpha)
    if n_eps is None:
        n_eps = default_n_eps(eps, mesh.alpha, c_cov)
    if n_eps < 1:
        raise DomainError(f"n_eps must be positive, got {n_eps}")

    z = np.arange(z_points) / z_points
    x = (np.arange(x_points) + 0.5) / x_points
    h = np.column_stack([(indicator(mesh, zk - eps, zk + eps) * (0.5 / eps)).hvals for zk in z])
    for beta in _beta_window(betas, m, n_eps):
        h = _apply(float(beta), mesh, h, conserve=False)
    values = evaluate_columns(mesh, h, x).T
    estimate = KernelEstimate(eps=eps, n_eps=n_eps, z=z, x=x, values=values)
    logger.info(f"Kernel eps={eps:.4g}, n_eps={n_eps}: gamma_hat={estimate.gamma_hat:.4g}")
    return estimate
