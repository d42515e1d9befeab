# test_quadrature.py
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from curvem.errors import QuadratureError
from curvem.meshgen import generate_benchmark_mesh
from curvem.quadrature import (boundary_moments, compress_rule, edge_rule, element_rule,
                               gauss_rules_1d, monomial_exponents, scaled_moments)
from curvem.types import Domain, MeshFamily, MeshRequest, QuadratureRule, RuleKind
from test_geometry import quarter_disk, unit_square


@pytest.fixture(scope="module")
def annulus():
    return generate_benchmark_mesh(MeshRequest(Domain.ANNULUS, MeshFamily.QUAD, 16))


@pytest.fixture(scope="module")
def disk():
    return generate_benchmark_mesh(MeshRequest(Domain.DISK, MeshFamily.QUAD, 50))


QUARTER = quarter_disk()


# ==================== 1D RULES ====================

@pytest.mark.parametrize("npts", [1, 2, 3, 5, 8, 15])
def test_gauss_legendre_exactness(npts):
    rule = gauss_rules_1d(npts, RuleKind.LEGENDRE)
    assert rule.order == 2 * npts - 1
    for degree in range(rule.order + 1):
        exact = 0.0 if degree % 2 else 2.0 / (degree + 1)
        assert rule.integrate(rule.points ** degree) == pytest.approx(exact, abs=1e-14)


@pytest.mark.parametrize("npts", [2, 3, 4, 6, 15])
def test_gauss_lobatto_exactness(npts):
    rule = gauss_rules_1d(npts, RuleKind.LOBATTO)
    assert rule.points[0] == -1.0 and rule.points[-1] == 1.0
    assert np.all(np.diff(rule.points) > 0)
    for degree in range(rule.order + 1):
        exact = 0.0 if degree % 2 else 2.0 / (degree + 1)
        assert rule.integrate(rule.points ** degree) == pytest.approx(exact, abs=1e-13)


def test_lobatto_needs_two_points():
    with pytest.raises(QuadratureError):
        gauss_rules_1d(1, RuleKind.LOBATTO)


def test_edge_rule_on_arc_measures_length():
    mesh = quarter_disk()
    rule = edge_rule(mesh.edges[1], 6)
    assert rule.measure == pytest.approx(np.pi / 2, rel=1e-12)
    np.testing.assert_allclose(np.linalg.norm(rule.points, axis=1), 1.0)
    np.testing.assert_allclose(rule.points[0], [1.0, 0.0], atol=1e-15)


def test_monomial_exponents_are_graded():
    assert monomial_exponents(2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


# ==================== ELEMENT RULES ====================

def test_boundary_moments_of_unit_square():
    mesh = unit_square(1)
    moments = boundary_moments(mesh, 0, 3)
    for a, b in monomial_exponents(3):
        assert moments[a, b] == pytest.approx(1.0 / ((a + 1) * (b + 1)), rel=1e-14)


def _check_rule(mesh, eid, n):
    rule = element_rule(mesh, eid, n)
    measures = mesh.measures(eid)
    exact = boundary_moments(mesh, eid, n, measures.centroid, measures.diameter)
    approx = scaled_moments(rule, n, measures.centroid, measures.diameter)
    np.testing.assert_allclose(approx, exact, atol=1e-11 * measures.area, rtol=0)
    assert np.all(rule.weights > 0)
    assert np.all(mesh.contains_points(eid, rule.points))


@pytest.mark.parametrize("n", range(7))
def test_element_rule_on_quarter_disk(n):
    _check_rule(quarter_disk(), 0, n)


@pytest.mark.parametrize("n", [0, 2, 4, 6])
def test_element_rule_on_annulus(annulus, n):
    for eid in range(annulus.n_elements):
        _check_rule(annulus, eid, n)


def test_element_rule_on_disk_boundary_cells(disk):
    curved = [e.id for e in disk.elements if any(disk.edges[i].is_curved for i in e.edges)]
    for eid in curved[:8]:
        _check_rule(disk, eid, 5)


def test_element_rule_is_cached(annulus):
    assert element_rule(annulus, 3, 4) is element_rule(annulus, 3, 4)


def test_negative_order_raises(annulus):
    with pytest.raises(QuadratureError):
        element_rule(annulus, 0, -1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=15, max_size=15))
def test_random_polynomials_integrate_exactly(coefficients):
    mesh = QUARTER
    rule = element_rule(mesh, 0, 4)
    moments = boundary_moments(mesh, 0, 4)
    x, y = rule.points[:, 0], rule.points[:, 1]
    approx = exact = 0.0
    for c, (a, b) in zip(coefficients, monomial_exponents(4)):
        approx += c * rule.integrate(x ** a * y ** b)
        exact += c * moments[a, b]
    assert abs(approx - exact) <= 1e-11 * sum(abs(c) for c in coefficients) + 1e-300


# ==================== COMPRESSION ====================

@pytest.mark.parametrize("n", [2, 3, 4])
def test_compressed_rule_keeps_moments(annulus, n):
    rule = element_rule(annulus, 5, n)
    compressed = compress_rule(rule, n)
    measures = annulus.measures(5)
    before = scaled_moments(rule, n, measures.centroid, measures.diameter)
    after = scaled_moments(compressed, n, measures.centroid, measures.diameter)
    np.testing.assert_allclose(after, before, atol=1e-10 * measures.area, rtol=0)
    assert np.all(compressed.weights > 0)
    if not compressed.flagged:
        assert compressed.size == (n + 1) * (n + 2) // 2


def test_small_rule_is_not_compressed():
    rule = gauss_rules_1d(2)
    assert compress_rule(rule, 3) is rule


def test_rule_without_positive_fit_is_flagged():
    points = np.random.default_rng(2).uniform(-1, 1, (10, 2))
    rule = QuadratureRule(points=points, weights=-np.ones(10), order=2)
    compressed = compress_rule(rule, 1)
    assert compressed.flagged
    np.testing.assert_array_equal(compressed.points, points)
    np.testing.assert_array_equal(compressed.weights, rule.weights)
