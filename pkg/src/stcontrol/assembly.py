"""Global sparse operators and the block optimality system.

Notation follows the discrete optimality system: ``A`` is the spatial
stiffness on Y_h, ``B`` the heat operator b(u, v) with rows indexed by Y_h
test dofs and columns by X_{0,h} trial dofs, ``C`` the mass matrix on
X_{0,h}.  The block system unknown is ``[p; u]``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import SimplicialMesh
from .refelem import batched_element_matrices, iter_cell_quadrature
from .spaces import FEFunction, FunctionSpace, Kind, make_space

REGULARIZATIONS = ("energy", "l2")
RHS_QUAD_DEGREE = 4


def _scatter(mesh: SimplicialMesh, local: np.ndarray) -> sp.csr_matrix:
    cells = mesh.cells
    k = cells.shape[1]
    rows = np.repeat(cells, k, axis=1).ravel()
    cols = np.tile(cells, (1, k)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_vertices,) * 2).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    mat.sort_indices()
    return mat


def vertex_matrices(mesh: SimplicialMesh) -> dict[str, sp.csr_matrix]:
    """Unconstrained P1 matrices on all vertices: ``stiffness``, ``timederiv``, ``mass``.

    Cached on the mesh; accumulation order is fixed so results are bit-exact
    across calls.
    """
    cache = mesh._cache
    if "vertex_matrices" not in cache:
        kx, kt, m = batched_element_matrices(mesh.volumes(), mesh.gradients())
        cache["vertex_matrices"] = {
            "stiffness": _scatter(mesh, kx),
            "timederiv": _scatter(mesh, kt),
            "mass": _scatter(mesh, m),
        }
    return cache["vertex_matrices"]


def _sub(mat: sp.csr_matrix, rows: FunctionSpace, cols: FunctionSpace) -> sp.csr_matrix:
    out = mat[rows.free_dofs][:, cols.free_dofs].tocsr()
    out.eliminate_zeros()
    out.sort_indices()
    return out


def _check_same_mesh(*spaces: FunctionSpace) -> None:
    if any(s.mesh is not spaces[0].mesh for s in spaces):
        raise ValueError("spaces live on different meshes")


def assemble_a(Yh: FunctionSpace) -> sp.csr_matrix:
    """a(p, v) = int grad_x p . grad_x v on the free dofs of ``Yh``."""
    return _sub(vertex_matrices(Yh.mesh)["stiffness"], Yh, Yh)


def assemble_b(X0h: FunctionSpace, Yh: FunctionSpace) -> sp.csr_matrix:
    """b(u, v) = int (du/dt v + grad_x u . grad_x v); rows Y_h tests, columns X_{0,h} trials."""
    _check_same_mesh(X0h, Yh)
    mats = vertex_matrices(X0h.mesh)
    return _sub(mats["timederiv"] + mats["stiffness"], Yh, X0h)


def assemble_timederiv(X0h: FunctionSpace, Yh: FunctionSpace) -> sp.csr_matrix:
    """int du/dt v only; the right-hand side of the discrete H^{-1} Riesz problem."""
    _check_same_mesh(X0h, Yh)
    return _sub(vertex_matrices(X0h.mesh)["timederiv"], Yh, X0h)


def assemble_mass(space: FunctionSpace, other: FunctionSpace | None = None) -> sp.csr_matrix:
    other = space if other is None else other
    _check_same_mesh(space, other)
    return _sub(vertex_matrices(space.mesh)["mass"], space, other)


def assemble_c(X0h: FunctionSpace) -> sp.csr_matrix:
    """c(u, q) = int u q on X_{0,h}."""
    return assemble_mass(X0h)


def load_vector(mesh: SimplicialMesh, f, quad_degree: int = RHS_QUAD_DEGREE) -> np.ndarray:
    """int f phi_i for every vertex i (no constraints applied)."""
    out = np.zeros(mesh.n_vertices)
    for sl, pts, w, bary in iter_cell_quadrature(mesh, quad_degree):
        vals = np.asarray(f(pts.reshape(-1, mesh.dim)), dtype=float).reshape(w.shape)
        local = np.einsum("cq,qk->ck", vals * w, bary)
        np.add.at(out, mesh.cells[sl].ravel(), local.ravel())
    return out


def assemble_rhs(space: FunctionSpace, u_d, quad_degree: int = RHS_QUAD_DEGREE) -> np.ndarray:
    """f_i = int u_d phi_i over the free dofs of ``space``.

    ``u_d`` may be a vectorised callable of points or an :class:`FEFunction`.
    """
    mesh = space.mesh
    if isinstance(u_d, FEFunction):
        if u_d.space.mesh is not mesh:
            raise ValueError("target lives on a different mesh")
        if u_d.space.kind is Kind.P1:
            full = vertex_matrices(mesh)["mass"] @ u_d.values
        else:
            local = mesh.volumes() * u_d.values / (mesh.dim + 1)
            full = np.zeros(mesh.n_vertices)
            np.add.at(full, mesh.cells.ravel(), np.repeat(local, mesh.dim + 1))
        return space.restrict(full)
    return space.restrict(load_vector(mesh, u_d, quad_degree))


@dataclass(eq=False)
class BlockSystem:
    """The 2x2 block system [[A/varrho, B], [-B^T, C]] [p; u] = [0; f]."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    f: np.ndarray
    varrho: float
    regularization: str
    Xh: FunctionSpace
    Yh: FunctionSpace
    _matrix: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def n_p(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.C.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        n = self.n_p + self.n_u
        return n, n

    @property
    def upper_left(self) -> sp.csr_matrix:
        return (self.A / self.varrho).tocsr()

    @property
    def lower_left(self) -> sp.csr_matrix:
        return (-self.B.T).tocsr()

    @property
    def matrix(self) -> sp.csr_matrix:
        if self._matrix is None:
            self._matrix = sp.bmat(
                [[self.upper_left, self.B], [self.lower_left, self.C]], format="csr")
        return self._matrix

    @property
    def rhs(self) -> np.ndarray:
        return np.concatenate([np.zeros(self.n_p), self.f])

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Split a block vector into (p, u) coefficient arrays."""
        return x[: self.n_p], x[self.n_p:]

    def residual(self, x: np.ndarray) -> float:
        """Relative residual ||rhs - K x|| / ||rhs|| (absolute if rhs vanishes)."""
        r = np.linalg.norm(self.rhs - self.matrix @ x)
        nb = np.linalg.norm(self.rhs)
        return float(r / nb) if nb > 0 else float(r)


def build_block_system(mesh: SimplicialMesh, varrho: float, u_d, regularization: str = "energy",
                       quad_degree: int = RHS_QUAD_DEGREE) -> BlockSystem:
    """Assemble the discrete optimality system for energy or L2 regularization.

    For ``l2`` the upper-left block is the Y_h mass matrix scaled by
    1/varrho (gradient equation p + varrho z = 0).
    """
    if not varrho > 0:
        raise ValueError(f"varrho must be positive, got {varrho}")
    if regularization not in REGULARIZATIONS:
        raise ValueError(f"regularization must be one of {REGULARIZATIONS}, got {regularization!r}")
    if varrho > 1:
        warnings.warn("varrho > 1: the discrete stability bound varrho/16 is not guaranteed",
                      stacklevel=2)
    Xh = make_space(mesh, "P1", "sigma_and_initial")
    Yh = make_space(mesh, "P1", "sigma_only")
    A = assemble_a(Yh) if regularization == "energy" else assemble_mass(Yh)
    return BlockSystem(
        A=A, B=assemble_b(Xh, Yh), C=assemble_c(Xh), f=assemble_rhs(Xh, u_d, quad_degree),
        varrho=float(varrho), regularization=regularization, Xh=Xh, Yh=Yh,
    )


def assemble_forward(mesh: SimplicialMesh, z, quad_degree: int = RHS_QUAD_DEGREE):
    """Square Galerkin system of the heat equation with trial = test = X_{0,h}.

    Returns ``(matrix, rhs, space)``; ``z`` is a callable or an FEFunction.
    """
    Xh = make_space(mesh, "P1", "sigma_and_initial")
    mats = vertex_matrices(mesh)
    mat = _sub(mats["timederiv"] + mats["stiffness"], Xh, Xh)
    return mat, assemble_rhs(Xh, z, quad_degree), Xh
