import itertools
import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stcontrol.refelem import (AffineMap, monomial_integral, p1_element_matrices, quadrature)

REF_TET = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)


def symbolic_tet_integral(expr, x, y, t):
    return sympy.integrate(expr, (t, 0, 1 - x - y), (y, 0, 1 - x), (x, 0, 1))


def test_reference_tet_mass_symbolic():
    x, y, t = sympy.symbols("x y t")
    phis = [1 - x - y - t, x, y, t]
    _, _, mass = p1_element_matrices(AffineMap.from_vertices(REF_TET))
    for i, j in itertools.product(range(4), repeat=2):
        exact = float(symbolic_tet_integral(phis[i] * phis[j], x, y, t))
        assert abs(mass[i, j] - exact) < 1e-15
    assert mass[0, 0] == pytest.approx(1 / 60, abs=1e-15)
    assert mass[0, 1] == pytest.approx(1 / 120, abs=1e-15)


def test_reference_tet_timederiv_symbolic():
    x, y, t = sympy.symbols("x y t")
    phis = [1 - x - y - t, x, y, t]
    _, kt, _ = p1_element_matrices(AffineMap.from_vertices(REF_TET))
    for i, j in itertools.product(range(4), repeat=2):
        exact = float(symbolic_tet_integral(sympy.diff(phis[j], t) * phis[i], x, y, t))
        assert abs(kt[i, j] - exact) < 1e-15
    np.testing.assert_allclose(kt[:, 3], 1 / 24, atol=1e-15)
    np.testing.assert_allclose(kt[:, 0], -1 / 24, atol=1e-15)


def test_reference_tet_stiffness_symbolic():
    x, y, t = sympy.symbols("x y t")
    phis = [1 - x - y - t, x, y, t]
    kx, _, _ = p1_element_matrices(AffineMap.from_vertices(REF_TET))
    for i, j in itertools.product(range(4), repeat=2):
        integrand = sum(sympy.diff(phis[i], s) * sympy.diff(phis[j], s) for s in (x, y))
        exact = float(symbolic_tet_integral(integrand, x, y, t))
        assert abs(kx[i, j] - exact) < 1e-15


def _quadrature_element_matrices(cell: AffineMap):
    """Degree-2 quadrature route: shape values at points, gradients from the map."""
    dim = cell.dim
    rule = quadrature(dim, 2)
    lam = rule.barycentric
    w = rule.weights * abs(cell.det)
    ref_grad = np.vstack([-np.ones(dim), np.eye(dim)])
    grads = ref_grad @ np.linalg.inv(cell.jacobian)
    mass = np.einsum("q,qi,qj->ij", w, lam, lam)
    kt = np.einsum("q,qi,j->ij", w, lam, grads[:, -1])
    gx = grads[:, :-1]
    kx = w.sum() * gx @ gx.T
    return kx, kt, mass


def random_cell(rng, dim):
    while True:
        v = rng.normal(size=(dim + 1, dim))
        m = AffineMap.from_vertices(v)
        if m.det < 0:
            v[[0, 1]] = v[[1, 0]]
            m = AffineMap.from_vertices(v)
        if m.det > 1e-2:
            return m


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_closed_form_matches_quadrature(dim, rng):
    for _ in range(20):
        cell = random_cell(rng, dim)
        for closed, quad in zip(p1_element_matrices(cell), _quadrature_element_matrices(cell)):
            scale = max(1.0, np.abs(closed).max())
            assert np.abs(closed - quad).max() <= 1e-12 * scale


cells = st.integers(2, 4).flatmap(
    lambda d: arrays(np.float64, (d + 1, d), elements=st.floats(-3, 3, allow_nan=False, width=64)))


@settings(max_examples=60, deadline=None)
@given(cells)
def test_element_matrix_invariants(vertices):
    cell = AffineMap.from_vertices(vertices) if np.linalg.det((vertices[1:] - vertices[0]).T) != 0 else None
    if cell is None or abs(cell.det) < 1e-3:
        return
    if cell.det < 0:
        vertices = vertices[[1, 0] + list(range(2, len(vertices)))]
        cell = AffineMap.from_vertices(vertices)
    kx, kt, m = p1_element_matrices(cell)
    vol = cell.volume
    k = cell.dim + 1
    scale = max(1.0, np.abs(kx).max())
    assert np.allclose(kx, kx.T, atol=1e-12 * scale)
    assert np.all(np.diag(kx) >= -1e-12 * scale)
    assert np.abs(kx.sum(axis=1)).max() <= 1e-10 * scale
    assert np.allclose(m, m.T)
    assert np.all(np.linalg.eigvalsh(m) > 0)
    np.testing.assert_allclose(m.sum(axis=1), vol / k, rtol=1e-12)
    # partition of unity: column sums of timederiv equal dphi_j/dt * |tau|
    grads = np.vstack([-np.ones(cell.dim), np.eye(cell.dim)]) @ np.linalg.inv(cell.jacobian)
    np.testing.assert_allclose(kt.sum(axis=0), grads[:, -1] * vol, rtol=1e-10,
                               atol=1e-12 * max(1.0, np.abs(kt).max()))
    np.testing.assert_allclose(kt.sum(axis=1), 0.0, atol=1e-10 * max(1.0, np.abs(kt).max()))


def test_affine_map_inverse():
    cell = AffineMap.from_vertices([[0, 0, 0], [2, 0.1, 0], [0.3, 1, 0], [0, 0.2, 0.5]])
    np.testing.assert_allclose(cell.inv_jacobian_T @ cell.jacobian.T, np.eye(3), atol=1e-12)


def test_degenerate_cell_rejected():
    cell = AffineMap.from_vertices([[0, 0], [1, 0], [0, 1e-16]])
    with pytest.raises(ValueError):
        p1_element_matrices(cell)


def test_negative_orientation_rejected():
    cell = AffineMap.from_vertices([[0, 0], [0, 1], [1, 0]])
    with pytest.raises(ValueError):
        p1_element_matrices(cell)


def test_monomial_integral_known_values():
    assert monomial_integral([0, 0]) == pytest.approx(0.5)
    assert monomial_integral([1, 0]) == pytest.approx(1 / 6)
    assert monomial_integral([2, 0]) == pytest.approx(1 / 12)
    assert monomial_integral([1, 1]) == pytest.approx(1 / 24)
    assert monomial_integral([0, 0, 0, 0]) == pytest.approx(1 / 24)
    x, y = sympy.symbols("x y")
    sym = sympy.integrate(x**3 * y**2, (y, 0, 1 - x), (x, 0, 1))
    assert monomial_integral([3, 2]) == pytest.approx(float(sym), rel=1e-14)


def test_centroid_rule():
    r = quadrature(3, 1)
    np.testing.assert_allclose(r.points, [[0.25, 0.25, 0.25]])
    np.testing.assert_allclose(r.weights, [1 / 6])


def test_degree2_triangle_has_three_points():
    r = quadrature(2, 2)
    assert len(r.weights) == 3
    for exps in ([2, 0], [1, 1], [0, 2]):
        val = np.sum(r.weights * np.prod(r.points**np.array(exps), axis=1))
        assert abs(val - monomial_integral(exps)) < 1e-15


@pytest.mark.parametrize("dim", [2, 3, 4])
@pytest.mark.parametrize("degree", [1, 2, 3, 4, 5, 6])
def test_quadrature_exactness(dim, degree):
    r = quadrature(dim, degree)
    assert np.all(r.weights > 0)
    assert abs(r.weights.sum() - 1 / math.factorial(dim)) < 1e-14
    assert np.all(r.points >= 0) and np.all(r.points.sum(axis=1) <= 1 + 1e-14)
    for exps in itertools.product(range(degree + 1), repeat=dim):
        if sum(exps) > degree:
            continue
        val = np.sum(r.weights * np.prod(r.points**np.array(exps), axis=1))
        assert abs(val - monomial_integral(exps)) < 1e-12


def test_quadrature_degree_is_sharp_for_conical_rule():
    # degree-4 rule in 4D must miss something of degree 6 or higher
    r = quadrature(4, 4)
    exps = [6, 0, 0, 0]
    val = np.sum(r.weights * np.prod(r.points**np.array(exps), axis=1))
    assert abs(val - monomial_integral(exps)) > 1e-10


@pytest.mark.parametrize("bad", [(3, 0), (3, 7), (5, 2), (1, 2)])
def test_quadrature_rejects(bad):
    with pytest.raises(ValueError):
        quadrature(*bad)
