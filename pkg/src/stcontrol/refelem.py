"""P1 element matrices, affine maps and simplex quadrature (dim 2-4)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .mesh import reference_gradients

MAX_DEGREE = 6


@dataclass(frozen=True)
class AffineMap:
    jacobian: np.ndarray
    origin: np.ndarray
    det: float
    inv_jacobian_T: np.ndarray

    @classmethod
    def from_vertices(cls, vertices) -> "AffineMap":
        vertices = np.asarray(vertices, dtype=float)
        jac = (vertices[1:] - vertices[0]).T
        det = float(np.linalg.det(jac))
        if det == 0.0:
            raise ValueError("degenerate simplex")
        return cls(jacobian=jac, origin=vertices[0].copy(), det=det,
                   inv_jacobian_T=np.linalg.inv(jac).T)

    @property
    def dim(self) -> int:
        return self.jacobian.shape[0]

    @property
    def volume(self) -> float:
        return abs(self.det) / math.factorial(self.dim)

    def __call__(self, ref_points: np.ndarray) -> np.ndarray:
        return ref_points @ self.jacobian.T + self.origin


@dataclass(frozen=True)
class QuadratureRule:
    """Points in reference coordinates of the unit simplex; weights sum to 1/dim!."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def barycentric(self) -> np.ndarray:
        return np.column_stack([1.0 - self.points.sum(axis=1), self.points])


def _degree2_rule(dim: int) -> tuple[np.ndarray, np.ndarray]:
    # symmetric (dim+1)-point rule; barycentric coordinates (b, a, ..., a) and permutations
    s = math.sqrt(dim + 2)
    a = (dim + 2 - s) / ((dim + 1) * (dim + 2))
    b = 1.0 - dim * a
    bary = np.full((dim + 1, dim + 1), a)
    np.fill_diagonal(bary, b)
    w = np.full(dim + 1, 1.0 / (math.factorial(dim) * (dim + 1)))
    return bary[:, 1:], w


def _conical_product(dim: int, npts: int) -> tuple[np.ndarray, np.ndarray]:
    # collapsed coordinates: x_k = u_k * prod_{j<k} (1 - u_j); Jacobian weight (1-u_k)^(dim-1-k)
    nodes, weights = [], []
    for k in range(dim):
        alpha = dim - 1 - k
        r, w = roots_jacobi(npts, alpha, 0.0)
        nodes.append((r + 1.0) / 2.0)
        weights.append(w / 2.0 ** (alpha + 1))
    grids = np.meshgrid(*nodes, indexing="ij")
    wgrids = np.meshgrid(*weights, indexing="ij")
    u = np.stack([g.ravel() for g in grids], axis=-1)
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=1)
    x = np.empty_like(u)
    remaining = np.ones(len(u))
    for k in range(dim):
        x[:, k] = u[:, k] * remaining
        remaining = remaining * (1.0 - u[:, k])
    return x, w


@lru_cache(maxsize=None)
def quadrature(dim: int, degree: int) -> QuadratureRule:
    """Positive-weight rule on the unit ``dim``-simplex exact to ``degree``.

    Degrees 1 and 2 use the centroid and the symmetric (dim+1)-point rule;
    higher degrees use a Gauss-Jacobi conical product.
    """
    if dim not in (2, 3, 4):
        raise ValueError(f"unsupported dimension {dim}")
    if int(degree) != degree or not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree}")
    if degree == 1:
        pts = np.full((1, dim), 1.0 / (dim + 1))
        w = np.array([1.0 / math.factorial(dim)])
    elif degree == 2:
        pts, w = _degree2_rule(dim)
    else:
        pts, w = _conical_product(dim, (degree + 2) // 2)
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(points=pts, weights=w, degree=int(degree))


def monomial_integral(exponents) -> float:
    """Exact integral of prod x_i^a_i over the unit simplex: prod(a_i!) / (|a| + dim)!."""
    exponents = [int(a) for a in exponents]
    num = math.prod(math.factorial(a) for a in exponents)
    return num / math.factorial(sum(exponents) + len(exponents))


def p1_element_matrices(cell: AffineMap, h: float | None = None):
    """Closed-form P1 matrices (stiffness_x, timederiv, mass) on one cell.

    ``timederiv[i, j] = int dphi_j/dt * phi_i``; stiffness uses only the
    spatial gradient components (time is the last axis).
    """
    dim = cell.dim
    if h is None:
        h = float(np.max(np.linalg.norm(cell.jacobian, axis=0)))
    if abs(cell.det) < 1e-14 * h**dim:
        raise ValueError("degenerate cell")
    if cell.det < 0:
        raise ValueError("cell is negatively oriented")
    vol = cell.volume
    grads = reference_gradients(dim) @ cell.inv_jacobian_T.T
    gx = grads[:, :-1]
    stiffness_x = vol * gx @ gx.T
    timederiv = np.tile(grads[:, -1], (dim + 1, 1)) * (vol / (dim + 1))
    mass = (np.ones((dim + 1, dim + 1)) + np.eye(dim + 1)) * vol / ((dim + 1) * (dim + 2))
    return stiffness_x, timederiv, mass


def batched_element_matrices(volumes: np.ndarray, gradients: np.ndarray):
    """Vectorised :func:`p1_element_matrices` over all cells of a mesh."""
    k = gradients.shape[1]
    gx = gradients[:, :, :-1]
    stiffness_x = volumes[:, None, None] * np.einsum("cid,cjd->cij", gx, gx)
    timederiv = (volumes / k)[:, None, None] * np.broadcast_to(gradients[:, None, :, -1], (len(volumes), k, k))
    mass_ref = (np.ones((k, k)) + np.eye(k)) / (k * (k + 1))
    mass = volumes[:, None, None] * mass_ref[None]
    return stiffness_x, timederiv, mass


def iter_cell_quadrature(mesh, degree: int, chunk: int = 20000):
    """Yield ``(cells, points, weights, bary)`` for blocks of mesh cells.

    ``points`` has shape (c, q, dim), ``weights`` (c, q) already include the
    cell volume and ``bary`` (q, dim+1) are the P1 shape-function values.
    """
    rule = quadrature(mesh.dim, degree)
    bary = rule.barycentric
    ref_w = rule.weights * math.factorial(mesh.dim)
    vols = mesh.volumes()
    for start in range(0, mesh.n_cells, chunk):
        sl = slice(start, min(start + chunk, mesh.n_cells))
        x = mesh.vertices[mesh.cells[sl]]
        points = np.einsum("qk,ckd->cqd", bary, x)
        weights = vols[sl, None] * ref_w[None, :]
        yield sl, points, weights, bary
