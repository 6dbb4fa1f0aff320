"""Structured Kuhn (Freudenthal) simplicial meshes of the space-time cylinder.

The cylinder is ``Q = (0, 1)^(dim-1) x (0, T)``; time is always the last
coordinate.  Each grid hypercube is split into ``dim!`` simplices, one per
permutation of the axes, which makes the triangulation conforming across
cube faces.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

BOUNDARY_TOL = 1e-10


class BoundaryTag(enum.IntEnum):
    LATERAL = 0
    INITIAL = 1
    TERMINAL = 2


class MeshError(ValueError):
    pass


def _permutation_parity(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


@dataclass(frozen=True, eq=False)
class SimplicialMesh:
    """Vertices, positively oriented cells and tagged boundary facets.

    ``n`` is the number of subdivisions per axis of the underlying grid and
    ``h`` the largest cell diameter.  Instances are treated as immutable.
    """

    dim: int
    n: int
    T: float
    vertices: np.ndarray
    cells: np.ndarray
    level: int = 0
    boundary_facets: np.ndarray | None = None
    boundary_tags: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def h(self) -> float:
        return math.sqrt((self.dim - 1) + self.T**2) / self.n

    @property
    def h_label(self) -> float:
        """Nominal mesh size 1/n, the value reported in convergence tables."""
        return 1.0 / self.n

    @property
    def spatial_dim(self) -> int:
        return self.dim - 1

    def jacobians(self) -> np.ndarray:
        """Per-cell affine Jacobians, columns are edge vectors from vertex 0."""
        if "jac" not in self._cache:
            x = self.vertices[self.cells]
            self._cache["jac"] = np.transpose(x[:, 1:, :] - x[:, :1, :], (0, 2, 1))
        return self._cache["jac"]

    def volumes(self) -> np.ndarray:
        if "vol" not in self._cache:
            self._cache["vol"] = np.linalg.det(self.jacobians()) / math.factorial(self.dim)
        return self._cache["vol"]

    def gradients(self) -> np.ndarray:
        """Constant P1 shape-function gradients, shape (n_cells, dim+1, dim)."""
        if "grad" not in self._cache:
            inv_jt = np.linalg.inv(self.jacobians()).transpose(0, 2, 1)
            ref = reference_gradients(self.dim)
            self._cache["grad"] = np.einsum("cij,kj->cki", inv_jt, ref)
        return self._cache["grad"]

    def tagged_vertices(self, tag: BoundaryTag) -> np.ndarray:
        """Sorted indices of vertices lying on a facet carrying ``tag``."""
        if self.boundary_tags is None:
            raise MeshError("mesh has no boundary classification")
        facets = self.boundary_facets[self.boundary_tags == tag]
        return np.unique(facets)

    def facet_counts(self) -> dict[BoundaryTag, int]:
        return {t: int(np.sum(self.boundary_tags == t)) for t in BoundaryTag}


def reference_gradients(dim: int) -> np.ndarray:
    """Gradients of barycentric shape functions on the unit reference simplex."""
    g = np.zeros((dim + 1, dim))
    g[0, :] = -1.0
    g[1:, :] = np.eye(dim)
    return g


def _kuhn_cells(dim: int, n: int) -> np.ndarray:
    strides = (n + 1) ** np.arange(dim - 1, -1, -1)
    # local simplices of the unit cube, as offsets of cube-corner ids
    local = []
    for perm in itertools.permutations(range(dim)):
        corner = np.zeros(dim, dtype=np.int64)
        path = [0]
        for axis in perm:
            corner[axis] = 1
            path.append(int(corner @ strides))
        if _permutation_parity(perm) < 0:
            path[0], path[1] = path[1], path[0]
        local.append(path)
    local = np.array(local, dtype=np.int64)

    idx = np.stack(np.meshgrid(*[np.arange(n)] * dim, indexing="ij"), axis=-1).reshape(-1, dim)
    base = idx @ strides
    return (base[:, None, None] + local[None, :, :]).reshape(-1, dim + 1)


def kuhn_grid(dim: int, n: int, T: float = 1.0, level: int = 0) -> SimplicialMesh:
    """Kuhn triangulation of the ``n^dim`` grid over ``(0,1)^(dim-1) x (0,T)``.

    Returns a classified mesh with ``(n+1)^dim`` vertices and ``n^dim * dim!``
    cells.
    """
    if dim not in (2, 3, 4):
        raise MeshError(f"dim must be 2, 3 or 4, got {dim}")
    if int(n) != n or n < 1:
        raise MeshError(f"n must be a positive integer, got {n}")
    if not T > 0:
        raise MeshError(f"T must be positive, got {T}")
    n = int(n)
    axis = np.linspace(0.0, 1.0, n + 1)
    grids = np.meshgrid(*[axis] * dim, indexing="ij")
    vertices = np.stack([g.ravel() for g in grids], axis=-1)
    vertices[:, -1] *= T
    cells = _kuhn_cells(dim, n)
    mesh = SimplicialMesh(dim=dim, n=n, T=float(T), vertices=vertices, cells=cells, level=level)
    if np.any(mesh.volumes() <= 0):
        raise MeshError("Kuhn construction produced a non-positive cell")  # pragma: no cover
    return classify_boundary(mesh)


def refine_uniform(mesh: SimplicialMesh) -> SimplicialMesh:
    """Regenerate the structured mesh at twice the resolution."""
    return kuhn_grid(mesh.dim, 2 * mesh.n, mesh.T, level=mesh.level + 1)


def cell_facets(cells: np.ndarray) -> np.ndarray:
    """All facets of all cells, shape (n_cells, dim+1, dim); facet k omits vertex k."""
    k = cells.shape[1]
    keep = np.array([[j for j in range(k) if j != i] for i in range(k)])
    return cells[:, keep]


def boundary_facets(cells: np.ndarray) -> np.ndarray:
    """Facets incident to exactly one cell, vertex indices sorted per facet."""
    facets = np.sort(cell_facets(cells).reshape(-1, cells.shape[1] - 1), axis=1)
    uniq, counts = np.unique(facets, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("non-manifold facet shared by more than two cells")
    return uniq[counts == 1]


def classify_boundary(mesh: SimplicialMesh) -> SimplicialMesh:
    """Attach boundary facets and their Lateral/Initial/Terminal tags."""
    facets = boundary_facets(mesh.cells)
    centroids = mesh.vertices[facets].mean(axis=1)
    t = centroids[:, -1]
    x = centroids[:, :-1]
    tags = np.full(len(facets), -1, dtype=np.int64)
    on_lateral = np.any((np.abs(x) < BOUNDARY_TOL) | (np.abs(x - 1.0) < BOUNDARY_TOL), axis=1)
    tags[on_lateral] = BoundaryTag.LATERAL
    tags[np.abs(t) < BOUNDARY_TOL] = BoundaryTag.INITIAL
    tags[np.abs(t - mesh.T) < BOUNDARY_TOL] = BoundaryTag.TERMINAL
    if np.any(tags < 0):
        raise MeshError("boundary facet lies on none of the cylinder surfaces")
    return SimplicialMesh(
        dim=mesh.dim, n=mesh.n, T=mesh.T, vertices=mesh.vertices, cells=mesh.cells,
        level=mesh.level, boundary_facets=facets, boundary_tags=tags,
    )


def locate(mesh: SimplicialMesh, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Find containing cells and barycentric coordinates of ``points``.

    Uses the Kuhn structure directly: the grid cube is found by flooring and
    the simplex by sorting the local coordinates.  Points on shared faces
    get one of the admissible cells.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dim, n = mesh.dim, mesh.n
    scaled = points.copy()
    scaled[:, -1] /= mesh.T
    scaled *= n
    if np.any(scaled < -1e-9) or np.any(scaled > n + 1e-9):
        raise MeshError("point outside the space-time cylinder")
    cube = np.clip(np.floor(scaled).astype(np.int64), 0, n - 1)
    local = scaled - cube
    # descending order of local coordinates selects the permutation path
    order = np.argsort(-local, axis=1, kind="stable")
    perms = list(itertools.permutations(range(dim)))
    perm_id = {p: i for i, p in enumerate(perms)}
    pid = np.array([perm_id[tuple(row)] for row in order])
    cube_id = np.zeros(len(points), dtype=np.int64)
    for a in range(dim):
        cube_id = cube_id * n + cube[:, a]
    cell = cube_id * len(perms) + pid

    verts = mesh.vertices[mesh.cells[cell]]
    jac = np.transpose(verts[:, 1:, :] - verts[:, :1, :], (0, 2, 1))
    lam_rest = np.linalg.solve(jac, (points - verts[:, 0, :])[..., None])[..., 0]
    bary = np.concatenate([1.0 - lam_rest.sum(axis=1, keepdims=True), lam_rest], axis=1)
    return cell, bary
