import itertools
import math
from collections import Counter

import numpy as np
import pytest

from stcontrol.mesh import (BoundaryTag, MeshError, classify_boundary, kuhn_grid, locate,
                            refine_uniform)


def brute_force_facet_counts(cells):
    counts = Counter()
    for cell in cells.tolist():
        for facet in itertools.combinations(sorted(cell), len(cell) - 1):
            counts[facet] += 1
    return counts


@pytest.mark.parametrize("dim,n,nv,nc", [(3, 4, 125, 384), (3, 1, 8, 6), (2, 2, 9, 8), (4, 2, 81, 384)])
def test_kuhn_counts(dim, n, nv, nc):
    m = kuhn_grid(dim, n)
    assert m.n_vertices == nv == (n + 1) ** dim
    assert m.n_cells == nc == n**dim * math.factorial(dim)


def test_h_label_and_diameter():
    m = kuhn_grid(3, 4)
    assert m.h_label == 0.25
    edges = m.vertices[m.cells][:, :, None, :] - m.vertices[m.cells][:, None, :, :]
    assert np.isclose(np.linalg.norm(edges, axis=-1).max(), m.h)


@pytest.mark.parametrize("dim", [2, 3, 4])
@pytest.mark.parametrize("T", [1.0, 2.5])
def test_positive_volumes_cover_cylinder(dim, T):
    m = kuhn_grid(dim, 3, T)
    vol = m.volumes()
    assert np.all(vol > 0)
    assert abs(vol.sum() - T) <= 1e-12 * T


@pytest.mark.parametrize("dim,n", [(2, 3), (3, 2), (3, 3), (4, 2)])
def test_facet_incidence_brute_force(dim, n):
    m = kuhn_grid(dim, n)
    counts = brute_force_facet_counts(m.cells)
    assert set(counts.values()) <= {1, 2}
    boundary = sorted(f for f, c in counts.items() if c == 1)
    assert boundary == sorted(map(tuple, m.boundary_facets.tolist()))


def test_boundary_facet_count_dim3_n4():
    m = kuhn_grid(3, 4)
    counts = brute_force_facet_counts(m.cells)
    assert sum(1 for c in counts.values() if c == 1) == 192
    assert len(m.boundary_facets) == 192


@pytest.mark.parametrize("dim,n,expected", [
    (3, 1, {BoundaryTag.LATERAL: 8, BoundaryTag.INITIAL: 2, BoundaryTag.TERMINAL: 2}),
    (2, 2, {BoundaryTag.LATERAL: 4, BoundaryTag.INITIAL: 2, BoundaryTag.TERMINAL: 2}),
])
def test_tag_counts(dim, n, expected):
    assert kuhn_grid(dim, n).facet_counts() == expected


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_tags_match_geometry(dim):
    m = kuhn_grid(dim, 2, T=2.0)
    pts = m.vertices[m.boundary_facets]
    for tag, facets in zip(m.boundary_tags, pts):
        t = facets[:, -1]
        if tag == BoundaryTag.INITIAL:
            assert np.all(t == 0)
        elif tag == BoundaryTag.TERMINAL:
            assert np.all(t == 2.0)
        else:
            x = facets[:, :-1]
            assert np.any(np.all(x == 0, axis=0) | np.all(x == 1, axis=0))


def test_no_interior_vertex_on_tagged_facet():
    m = kuhn_grid(3, 3)
    x, t = m.vertices[:, :-1], m.vertices[:, -1]
    interior = np.all((x > 0) & (x < 1), axis=1) & (t > 0) & (t < 1)
    assert not np.any(interior[np.unique(m.boundary_facets)])


@pytest.mark.parametrize("dim,n,nv,nc", [(3, 4, 729, 3072), (2, 1, 9, 8), (4, 1, 81, 384)])
def test_refine_uniform(dim, n, nv, nc):
    coarse = kuhn_grid(dim, n)
    fine = refine_uniform(coarse)
    assert (fine.n_vertices, fine.n_cells, fine.level) == (nv, nc, coarse.level + 1)
    assert fine.h == pytest.approx(coarse.h / 2)
    # nested vertex sets
    fine_set = {tuple(np.round(v, 12)) for v in fine.vertices}
    assert all(tuple(np.round(v, 12)) in fine_set for v in coarse.vertices)
    assert abs(fine.volumes().sum() - 1.0) < 1e-12


def test_refinement_keeps_volume_across_levels():
    m = kuhn_grid(3, 1)
    for _ in range(3):
        m = refine_uniform(m)
        assert abs(m.volumes().sum() - 1.0) < 1e-12


@pytest.mark.parametrize("args", [(1, 2), (5, 2), (3, 0), (3, 1.5)])
def test_kuhn_rejects_bad_input(args):
    with pytest.raises(MeshError):
        kuhn_grid(*args)


def test_classify_rejects_foreign_facets():
    m = kuhn_grid(2, 2)
    bad = m.vertices.copy()
    bad[:, 0] = bad[:, 0] * 0.5 + 0.25  # shrink the spatial extent, boundary no longer at 0/1
    from stcontrol.mesh import SimplicialMesh
    shifted = SimplicialMesh(dim=2, n=2, T=1.0, vertices=bad, cells=m.cells)
    with pytest.raises(MeshError):
        classify_boundary(shifted)


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_locate_reproduces_points(dim, rng):
    m = kuhn_grid(dim, 3, T=1.5)
    pts = rng.random((200, dim))
    pts[:, -1] *= 1.5
    cell, bary = locate(m, pts)
    assert np.all(bary > -1e-12)
    np.testing.assert_allclose(np.einsum("pk,pkd->pd", bary, m.vertices[m.cells[cell]]), pts, atol=1e-12)


def test_locate_outside_raises():
    with pytest.raises(MeshError):
        locate(kuhn_grid(2, 2), [[1.5, 0.5]])
