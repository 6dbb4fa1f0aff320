"""Discrete spaces on a space-time mesh and functions living in them.

Constrained (essential boundary) vertices are eliminated: every matrix and
coefficient vector is indexed by the free dofs only, in ascending vertex
order.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .mesh import BoundaryTag, SimplicialMesh, locate


class Kind(str, enum.Enum):
    P1 = "P1"
    P0 = "P0"


class BC(str, enum.Enum):
    SIGMA_AND_INITIAL = "sigma_and_initial"
    SIGMA_ONLY = "sigma_only"
    NONE = "none"


class Role(str, enum.Enum):
    STATE = "state"
    ADJOINT = "adjoint"
    CONTROL = "control"
    AUXILIARY = "auxiliary"
    TARGET = "target-projection"


@dataclass(frozen=True, eq=False)
class FunctionSpace:
    mesh: SimplicialMesh
    kind: Kind
    bc: BC
    constrained: np.ndarray
    free_dofs: np.ndarray
    free_index: np.ndarray

    @property
    def n_free(self) -> int:
        return len(self.free_dofs)

    @property
    def n_entities(self) -> int:
        return len(self.constrained)

    def extend(self, coeffs: np.ndarray) -> np.ndarray:
        """Values on all vertices (or cells), zero on constrained ones."""
        full = np.zeros(self.n_entities)
        full[self.free_dofs] = coeffs
        return full

    def restrict(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values)[self.free_dofs]

    def cell_dofs(self) -> np.ndarray:
        """Free-dof index per local vertex of each cell, -1 where constrained."""
        if self.kind is not Kind.P1:
            raise ValueError("cell_dofs is only defined for P1 spaces")
        return self.free_index[self.mesh.cells]


def make_space(mesh: SimplicialMesh, kind="P1", bc="sigma_and_initial") -> FunctionSpace:
    """Build X_{0,h} (``sigma_and_initial``), Y_h (``sigma_only``) or an unconstrained space."""
    kind, bc = Kind(kind), BC(bc)
    if kind is Kind.P0:
        if bc is not BC.NONE:
            raise ValueError("P0 spaces carry no boundary constraints")
        constrained = np.zeros(mesh.n_cells, dtype=bool)
    else:
        constrained = np.zeros(mesh.n_vertices, dtype=bool)
        if bc is not BC.NONE:
            constrained[mesh.tagged_vertices(BoundaryTag.LATERAL)] = True
        if bc is BC.SIGMA_AND_INITIAL:
            constrained[mesh.tagged_vertices(BoundaryTag.INITIAL)] = True
    free = np.flatnonzero(~constrained)
    index = np.full(len(constrained), -1, dtype=np.int64)
    index[free] = np.arange(len(free))
    for arr in (constrained, free, index):
        arr.setflags(write=False)
    return FunctionSpace(mesh=mesh, kind=kind, bc=bc, constrained=constrained,
                         free_dofs=free, free_index=index)


@dataclass
class FEFunction:
    space: FunctionSpace
    coefficients: np.ndarray
    role: Role = Role.AUXILIARY
    _full: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.n_free,):
            raise ValueError(
                f"expected {self.space.n_free} coefficients, got {self.coefficients.shape}")
        self.role = Role(self.role)

    @property
    def values(self) -> np.ndarray:
        """Vertex (P1) or cell (P0) values including constrained zeros."""
        if self._full is None:
            self._full = self.space.extend(self.coefficients)
        return self._full

    def cell_gradients(self) -> np.ndarray:
        """Constant gradient of a P1 function on every cell, shape (n_cells, dim)."""
        mesh = self.space.mesh
        return np.einsum("ck,ckd->cd", self.values[mesh.cells], mesh.gradients())

    def __call__(self, points) -> np.ndarray:
        mesh = self.space.mesh
        cell, bary = locate(mesh, points)
        if self.space.kind is Kind.P0:
            return self.values[cell]
        return np.einsum("pk,pk->p", self.values[mesh.cells[cell]], bary)


def interpolate(space: FunctionSpace, f, role="auxiliary") -> FEFunction:
    """Nodal interpolation of a vectorised callable ``f(points) -> values``.

    For P0 spaces the value at each cell centroid is taken.
    """
    mesh = space.mesh
    if space.kind is Kind.P1:
        pts = mesh.vertices[space.free_dofs]
    else:
        pts = mesh.vertices[mesh.cells].mean(axis=1)
    vals = np.asarray(f(pts), dtype=float).reshape(-1)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite value in interpolation")
    return FEFunction(space, vals, role=role)
