from fractions import Fraction
from math import gcd

import numpy as np
import pytest

from latrdmft.errors import CapacityError, InfeasibleOccupationError
from latrdmft.functional import ConstrainedSearchProblem
from latrdmft.polytope import (affine_chart, build_polytope, contains,
                               facet_enumeration, incidence_matrix,
                               is_simplex, sector_polytope,
                               simplex_facet_order, simplex_normalized_values)

RING_FACETS = {(0, (-1, 1, 1)), (0, (1, -1, 1)), (0, (1, 1, -1)), (2, (-1, -1, -1))}


def test_ring_affine_chart(ring6_poly):
    chart = ring6_poly.chart
    assert chart.independent == (0, 1, 2)
    rel = chart.relations()
    assert rel[3] == (Fraction(1), {0: Fraction(-1)})
    assert rel[4] == (Fraction(1), {1: Fraction(-1)})
    assert rel[5] == (Fraction(1), {2: Fraction(-1)})


def test_ring_facets_golden(ring6_poly):
    got = {(f.constant, f.coefficients) for f in ring6_poly.facets}
    assert got == RING_FACETS


def test_square_chart_and_facets(square_poly):
    chart = square_poly.chart
    assert chart.dimension == 1
    assert chart.independent == (0,)        # n_{0 up} is the free coordinate
    rel = chart.relations()
    # spin symmetry, half-filled shells, and the particle-hole tie
    assert rel[1] == (Fraction(0), {0: Fraction(1)})      # n_{0 dn} = n_{0 up}
    assert rel[2] == (Fraction(1, 2), {})                 # n_{1 up} = 1/2
    assert rel[6] == (Fraction(1, 2), {})                 # n_{3 up} = 1/2
    assert rel[4] == (Fraction(1), {0: Fraction(-1)})     # n_{2 up} = 1 - n_{0 up}
    got = {(f.constant, f.coefficients) for f in square_poly.facets}
    assert got == {(0, (1,)), (1, (-1,))}


def test_square_incidence_golden(square_poly):
    A = incidence_matrix(square_poly)
    assert np.allclose(A, 0.5 * np.array([[2.0, 0.0, 1.0], [0.0, 2.0, 1.0]]),
                       atol=0)
    C = ConstrainedSearchProblem(square_poly, np.zeros((3, 3))).c_matrix()
    w = np.linalg.eigvalsh(C)
    assert np.allclose(np.sort(w), [0.0, 1.0, 1.5], atol=1e-12)


def test_ring_incidence_is_twice_identity_under_simplex_order(ring6_poly):
    order = simplex_facet_order(ring6_poly)
    A = incidence_matrix(ring6_poly)
    reordered = A[order, :]
    assert np.allclose(reordered, 2.0 * np.eye(4), atol=0)
    x = simplex_normalized_values(ring6_poly, [0.5, 0.5, 0.5])
    assert np.allclose(x, 0.25)


def test_incidence_columns_nonnegative_with_zero(ring6_poly, square_poly):
    for poly in (ring6_poly, square_poly):
        assert np.all(incidence_matrix(poly) >= 0)
    # every extreme generator lies on some facet; the square block also
    # carries a non-extreme generator (its open-shell state, column 3),
    # which sits strictly inside and touches none
    A6 = incidence_matrix(ring6_poly)
    assert np.all((A6 == 0).any(axis=0))
    A4 = incidence_matrix(square_poly)
    assert np.all((A4[:, :2] == 0).any(axis=0))
    assert not (A4[:, 2] == 0).any()


def test_contains_square(square_poly):
    # chart coordinate is n_{0 up} = 1 - n2
    inside, margin = contains(square_poly, [0.7])
    assert inside and margin == pytest.approx(0.3)
    inside, margin = contains(square_poly, [-0.1])
    assert not inside and margin == pytest.approx(-0.1)


def test_contains_ring_centroid(ring6_poly):
    inside, margin = contains(ring6_poly, [0.5, 0.5, 0.5])
    assert inside and margin == pytest.approx(0.5)


def test_is_simplex(ring6_poly, square_poly):
    assert is_simplex(ring6_poly)
    assert not is_simplex(square_poly)
    segment = build_polytope([(0,), (1,)])
    assert is_simplex(segment)
    assert {(f.constant, f.coefficients) for f in segment.facets} == \
        {(0, (1,)), (1, (-1,))}


def test_single_vertex_chart():
    poly = build_polytope([(1, 0, 1)])
    assert poly.chart.dimension == 0
    assert poly.facets == ()
    assert contains(poly, np.zeros(0)) == (True, 0.0)


def test_facet_coefficients_integer_coprime(ring6_poly, square_poly):
    for poly in (ring6_poly, square_poly):
        for f in poly.facets:
            values = [f.constant, *f.coefficients]
            assert all(isinstance(v, int) for v in values)
            g = 0
            for v in values:
                g = gcd(g, abs(v))
            assert g == 1


def test_convex_combinations_inside_violations_infeasible(ring6_poly, rng):
    verts = ring6_poly.chart_vertices()
    for _ in range(25):
        w = rng.dirichlet(np.ones(len(verts)))
        point = w @ verts
        inside, margin = contains(ring6_poly, point)
        assert inside
    # exterior points are not reachable by any convex combination
    problem = ConstrainedSearchProblem(ring6_poly, np.zeros((4, 4)))
    for f in ring6_poly.facets:
        kappa = np.asarray(f.coefficients, dtype=float)
        point = verts.mean(axis=0) - (0.6 + f.value(verts.mean(axis=0))) \
            * kappa / (kappa @ kappa)
        inside, _ = contains(ring6_poly, point)
        assert not inside
        with pytest.raises(InfeasibleOccupationError):
            problem.feasible_point(point)


def test_facet_tight_sets_span(ring6_poly, square_poly):
    for poly in (ring6_poly, square_poly):
        inc = poly.incidence_exact()
        pts = poly.chart_vertices()
        k = poly.chart.dimension
        for row in inc:
            tight = [r for r, v in enumerate(row) if v == 0]
            assert len(tight) >= k
            diffs = pts[tight] - pts[tight[0]]
            assert np.linalg.matrix_rank(diffs, tol=1e-12) == k - 1


def test_capacity_guard():
    dim = 14
    verts = np.vstack([np.zeros(dim), np.eye(dim)])
    with pytest.raises(CapacityError):
        build_polytope(verts.astype(int))


def test_chart_validates_on_adapted(square_block):
    # adapted occupations are exact rationals; the chart must re-derive
    # every generator point bit-exactly
    poly = sector_polytope(square_block)
    lift = poly.chart
    for point in poly.vertices:
        x = [point[q] for q in lift.independent]
        for q, value in enumerate(point):
            rebuilt = lift.offset[q] + sum(
                c * xi for c, xi in zip(lift.lift[q], x))
            assert rebuilt == value
