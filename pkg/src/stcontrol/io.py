"""VTK legacy ASCII, Matrix Market and slice-sampling exports."""
from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np
import scipy.io

from .mesh import BoundaryTag, SimplicialMesh
from .spaces import FEFunction, Kind

_VTK_CELL_TYPE = {2: 3, 3: 5, 4: 10}  # keyed by vertices per cell: line, triangle, tetra


def _points3(vertices: np.ndarray) -> np.ndarray:
    pts = np.zeros((len(vertices), 3))
    pts[:, : vertices.shape[1]] = vertices
    return pts


def _write_array(fh, arr, per_line=9):
    flat = np.asarray(arr).ravel()
    for i in range(0, len(flat), per_line):
        fh.write(" ".join(repr(float(v)) if flat.dtype.kind == "f" else str(v)
                          for v in flat[i:i + per_line]) + "\n")


def vertex_tags(mesh: SimplicialMesh) -> np.ndarray:
    """Per-vertex tag: -1 interior, else the boundary tag (Lateral wins, then Initial)."""
    tags = np.full(mesh.n_vertices, -1, dtype=np.int64)
    for tag in (BoundaryTag.TERMINAL, BoundaryTag.INITIAL, BoundaryTag.LATERAL):
        tags[mesh.tagged_vertices(tag)] = int(tag)
    return tags


def _write_unstructured(path, title, points, cells, point_data, cell_data):
    k = cells.shape[1]
    if k not in _VTK_CELL_TYPE:
        raise ValueError(f"VTK has no linear simplex with {k} vertices; export a slice instead")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(points)} double\n")
        _write_array(fh, _points3(points), per_line=3)
        fh.write(f"CELLS {len(cells)} {len(cells) * (k + 1)}\n")
        _write_array(fh, np.column_stack([np.full(len(cells), k), cells]), per_line=k + 1)
        fh.write(f"CELL_TYPES {len(cells)}\n")
        _write_array(fh, np.full(len(cells), _VTK_CELL_TYPE[k]), per_line=1)
        if point_data:
            fh.write(f"POINT_DATA {len(points)}\n")
            _write_fields(fh, point_data)
        if cell_data:
            fh.write(f"CELL_DATA {len(cells)}\n")
            _write_fields(fh, cell_data)
    return path


def _write_fields(fh, data: dict):
    for name, values in data.items():
        values = np.asarray(values)
        kind = "int" if values.dtype.kind in "iu" else "double"
        fh.write(f"SCALARS {name} {kind} 1\nLOOKUP_TABLE default\n")
        _write_array(fh, values, per_line=6)


def write_mesh_vtk(path, mesh: SimplicialMesh, functions: dict[str, FEFunction] | None = None):
    """Unstructured-grid export of a 2D/3D space-time mesh with vertex tags and fields.

    P1 functions become point data, P0 functions cell data.
    """
    point_data = {"boundary_tag": vertex_tags(mesh)}
    cell_data = {}
    for name, f in (functions or {}).items():
        target = point_data if f.space.kind is Kind.P1 else cell_data
        target[name] = f.values
    return _write_unstructured(path, f"space-time mesh dim={mesh.dim} n={mesh.n}",
                               mesh.vertices, mesh.cells, point_data, cell_data)


def write_boundary_vtk(path, mesh: SimplicialMesh):
    """Boundary facets with their Lateral/Initial/Terminal tag as cell data."""
    return _write_unstructured(path, "boundary facets", mesh.vertices, mesh.boundary_facets,
                               None, {"tag": mesh.boundary_tags.astype(np.int64)})


def sample_slice(f: FEFunction, axis: int, value: float, resolution: int = 32):
    """Sample ``f`` on a uniform grid of the hyperplane ``x[axis] = value``.

    Returns ``(grid_axes, values)`` with values shaped like the grid of the
    remaining axes (in their natural order).
    """
    mesh = f.space.mesh
    others = [a for a in range(mesh.dim) if a != axis]
    axes = []
    for a in others:
        upper = mesh.T if a == mesh.dim - 1 else 1.0
        axes.append(np.linspace(0.0, upper, resolution + 1))
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(others))
    pts = np.empty((len(grid), mesh.dim))
    pts[:, others] = grid
    pts[:, axis] = value
    return axes, f(pts).reshape([len(a) for a in axes])


def write_slice_vtk(path, f: FEFunction, axis: int, value: float, resolution: int = 32, name: str = "field"):
    """Structured-points export of a hyperplane slice (time slice: ``axis=-1``)."""
    mesh = f.space.mesh
    axis = axis % mesh.dim
    axes, vals = sample_slice(f, axis, value, resolution)
    if len(axes) > 3:
        raise ValueError("slice has more than three dimensions")
    dims = [len(a) for a in axes] + [1] * (3 - len(axes))
    spacing = [a[1] - a[0] for a in axes] + [1.0] * (3 - len(axes))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{name} slice axis={axis} value={value}\nASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}\n")
        fh.write("ORIGIN 0 0 0\n")
        fh.write("SPACING " + " ".join(repr(float(s)) for s in spacing) + "\n")
        fh.write(f"POINT_DATA {vals.size}\n")
        # VTK structured points run fastest along the first axis
        _write_fields(fh, {name: np.transpose(vals).ravel()})
    return path


def write_matrices(directory, system) -> list[Path]:
    """Matrix Market files for the blocks A, B, C and the full operator."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for name, mat in (("A", system.A), ("B", system.B), ("C", system.C), ("K", system.matrix)):
        p = directory / f"{name}.mtx"
        scipy.io.mmwrite(str(p), mat, symmetry="general")
        out.append(p)
    np.savetxt(directory / "rhs.txt", system.rhs)
    return out


def read_vtk_header(path) -> dict:
    """Tiny parser used for sanity checks: counts of points/cells and field names."""
    info = {"fields": []}
    with open(path) as fh:
        for line in itertools.islice(fh, None):
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "POINTS":
                info["points"] = int(tok[1])
            elif tok[0] == "CELLS":
                info["cells"] = int(tok[1])
            elif tok[0] == "DIMENSIONS":
                info["dimensions"] = tuple(int(t) for t in tok[1:4])
            elif tok[0] == "SCALARS":
                info["fields"].append(tok[1])
    return info
