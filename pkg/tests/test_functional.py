import numpy as np
import pytest

from latrdmft.errors import InfeasibleOccupationError
from latrdmft.functional import (ConstrainedSearchProblem, FunctionalOptions,
                                 boundary_expansion, exchange_force,
                                 functional_ensemble, functional_general,
                                 functional_simplex, interior_ray)
from latrdmft.model import InteractionSpec, build_interaction_matrix
from latrdmft.oracle import levy_brute_force
from latrdmft.polytope import (build_polytope, contains, sector_polytope,
                               simplex_facet_order, simplex_normalized_values)

from conftest import square_interaction


def centroid(poly):
    return poly.chart_vertices().mean(axis=0)


def chart_of_n2(square_poly, n2):
    return np.array([1.0 - n2])  # chart coordinate is n_{0 up}


# ---------------------------------------------------------------------------
# simplex path
# ---------------------------------------------------------------------------

def test_simplex_zero_interaction(ring6_poly):
    ev = functional_simplex(ring6_poly, np.zeros((4, 4)), centroid(ring6_poly))
    assert ev.value == 0.0
    assert np.allclose(ev.x.sum(), 1.0)


def test_simplex_vertex_value(ring6_poly, rng):
    A = rng.standard_normal((4, 4))
    V = (A + A.T) / 2
    for r, vert in enumerate(ring6_poly.chart_vertices()):
        ev = functional_simplex(ring6_poly, V, vert)
        assert ev.value == pytest.approx(V[r, r], abs=1e-12)


def test_simplex_centroid_vs_brute_force(ring6_basis, ring6_poly, ring6_nn):
    n = centroid(ring6_poly)
    ev = functional_simplex(ring6_poly, ring6_nn, n)
    ref = levy_brute_force(ring6_basis, ring6_nn,
                           ring6_poly.chart.to_full(n), restarts=40, seed=5)
    assert ev.value == pytest.approx(ref, abs=1e-10)


def test_simplex_requires_simplex(square_poly):
    with pytest.raises(ValueError):
        functional_simplex(square_poly, np.zeros((3, 3)), [0.5])


def test_simplex_rejects_outside(ring6_poly):
    with pytest.raises(InfeasibleOccupationError):
        functional_simplex(ring6_poly, np.zeros((4, 4)), [1.2, 0.5, 0.5])


# ---------------------------------------------------------------------------
# general path on the square block
# ---------------------------------------------------------------------------

def test_square_symmetric_point_vanishes(square_poly, square_block):
    V = square_interaction(square_block, 3.0)
    ev = functional_general(square_poly, V, chart_of_n2(square_poly, 0.5))
    assert abs(ev.value) < 1e-12
    assert ev.converged


def test_square_facet_limit(square_poly, square_block):
    V = square_interaction(square_block, 1.0)
    ev = functional_general(square_poly, V, chart_of_n2(square_poly, 1e-12))
    assert ev.value == pytest.approx(0.75, abs=1e-5)
    # exactly on the facet: the off-facet amplitude is forced out
    ev0 = functional_general(square_poly, V, chart_of_n2(square_poly, 0.0))
    assert ev0.value == pytest.approx(0.75, abs=1e-12)
    assert ev0.x[1] == 0.0 and ev0.x[2] == 0.0


def test_general_matches_simplex_on_nested_case(ring6_poly, ring6_nn, rng):
    problem = ConstrainedSearchProblem(ring6_poly, ring6_nn)
    verts = ring6_poly.chart_vertices()
    for _ in range(6):
        n = rng.dirichlet(np.ones(4) * 2.0) @ verts
        a = functional_simplex(ring6_poly, ring6_nn, n).value
        b = functional_general(problem, None, n).value
        assert a == pytest.approx(b, abs=1e-10)


def test_general_vs_brute_force_random(ring6_basis, ring6_poly, rng):
    for k in range(4):
        A = rng.standard_normal((4, 4))
        V = (A + A.T) / 2
        n = rng.dirichlet(np.ones(4) * 1.5) @ ring6_poly.chart_vertices()
        a = functional_general(ring6_poly, V, n).value
        b = levy_brute_force(ring6_basis, V, ring6_poly.chart.to_full(n),
                             restarts=60, seed=40 + k)
        assert a == pytest.approx(b, abs=1e-7)


def test_minimizer_feasibility(square_poly, square_block, ring6_poly, rng):
    V = square_interaction(square_block, 2.0)
    problem = ConstrainedSearchProblem(square_poly, V)
    for n2 in (0.05, 0.3, 0.77):
        ev = functional_general(problem, None, chart_of_n2(square_poly, n2))
        assert ev.x.min() >= -1e-12
        assert ev.x.sum() == pytest.approx(1.0, abs=1e-10)
        resid = problem.constraints @ ev.x - problem.rhs([1.0 - n2])
        assert np.max(np.abs(resid)) < 1e-10
        assert ev.recomputed_value(problem.interaction) == pytest.approx(
            ev.value, abs=1e-12)


def test_shift_and_permutation_invariance(ring6_poly, rng):
    A = rng.standard_normal((4, 4))
    V = (A + A.T) / 2
    n = np.array([0.55, 0.45, 0.35])
    base = functional_general(ring6_poly, V, n).value
    shifted = functional_general(ring6_poly, V + 2.5 * np.eye(4), n).value
    assert shifted == pytest.approx(base + 2.5, abs=1e-9)
    perm = [2, 0, 3, 1]
    poly_p = build_polytope([ring6_poly.vertices[p] for p in perm])
    permuted = functional_general(poly_p, V[np.ix_(perm, perm)], n).value
    assert permuted == pytest.approx(base, abs=1e-9)


def test_complex_interaction_refused(square_poly):
    V = np.eye(3, dtype=complex)
    V[0, 1] = 1j
    V[1, 0] = -1j
    with pytest.raises(NotImplementedError):
        ConstrainedSearchProblem(square_poly, V)


def test_infeasible_occupations_raise(square_poly, square_block):
    V = square_interaction(square_block, 1.0)
    with pytest.raises(InfeasibleOccupationError):
        functional_general(square_poly, V, [1.4])


# ---------------------------------------------------------------------------
# ensemble functional
# ---------------------------------------------------------------------------

def test_ensemble_zero_interaction(square_block):
    ev = functional_ensemble(square_block, np.zeros((3, 3)), [0.6])
    assert abs(ev.value) < 1e-10


def test_ensemble_equals_pure_under_sign_condition(square_poly, square_block):
    V = square_interaction(square_block, 1.7)
    for n2 in (0.15, 0.4, 0.8):
        fp = functional_general(square_poly, V, chart_of_n2(square_poly, n2)).value
        fe = functional_ensemble(square_poly, V, chart_of_n2(square_poly, n2)).value
        assert fe == pytest.approx(fp, abs=1e-6)
        assert fe <= fp + 1e-8


def test_ensemble_never_above_pure(ring6_poly, rng):
    for k in range(4):
        A = rng.standard_normal((4, 4))
        V = (A + A.T) / 2
        n = rng.dirichlet(np.ones(4) * 2.0) @ ring6_poly.chart_vertices()
        fp = functional_general(ring6_poly, V, n).value
        fe = functional_ensemble(ring6_poly, V, n).value
        assert fe <= fp + 1e-8


@pytest.mark.parametrize("n2", [0.2, 0.5])
def test_ensemble_against_sdp(square_poly, square_block, n2):
    cvxpy = pytest.importorskip("cvxpy")
    V = square_interaction(square_block, 1.3)
    problem = ConstrainedSearchProblem(square_poly, V)
    G = cvxpy.Variable((3, 3), PSD=True)
    target = problem.rhs(chart_of_n2(square_poly, n2))
    constraints = [problem.constraints @ cvxpy.diag(G) == target]
    sdp = cvxpy.Problem(cvxpy.Minimize(cvxpy.trace(problem.interaction @ G)),
                        constraints)
    sdp.solve(solver=cvxpy.SCS, eps_abs=1e-11, eps_rel=1e-11, max_iters=200000)
    fe = functional_ensemble(square_poly, V, chart_of_n2(square_poly, n2)).value
    assert fe == pytest.approx(sdp.value, abs=1e-6)


# ---------------------------------------------------------------------------
# exchange force and boundary expansion
# ---------------------------------------------------------------------------

def test_force_vanishes_at_symmetric_point(square_poly, square_block):
    V = square_interaction(square_block, 1.0)
    problem = ConstrainedSearchProblem(square_poly, V)
    g = exchange_force(problem, [0.5])
    assert abs(g[0]) < 1e-6


def test_force_divergence_scaling(square_poly, square_block):
    V = square_interaction(square_block, 1.0)
    problem = ConstrainedSearchProblem(square_poly, V)
    g_small = exchange_force(problem, chart_of_n2(square_poly, 1e-4), step=1e-6)
    g_large = exchange_force(problem, chart_of_n2(square_poly, 1e-2), step=1e-6)
    ratio = abs(g_small[0]) / abs(g_large[0])
    assert ratio == pytest.approx(10.0, rel=0.15)  # the inverse-sqrt law


def test_force_is_repulsive_near_facets(ring6_poly, ring6_nn, square_poly,
                                        square_block):
    problem = ConstrainedSearchProblem(ring6_poly, ring6_nn)
    for j in range(ring6_poly.n_facets):
        base, direction = interior_ray(ring6_poly, j)
        point = base + 1e-3 * direction
        force = -exchange_force(problem, point, step=1e-5)
        kappa = np.asarray(ring6_poly.facets[j].coefficients, dtype=float)
        assert force @ kappa > 0
    V = square_interaction(square_block, 1.0)
    problem_sq = ConstrainedSearchProblem(square_poly, V)
    for j in range(square_poly.n_facets):
        base, direction = interior_ray(square_poly, j)
        point = base + 1e-3 * direction
        force = -exchange_force(problem_sq, point, step=1e-5)
        kappa = np.asarray(square_poly.facets[j].coefficients, dtype=float)
        assert force @ kappa > 0


def test_force_step_guard(square_poly, square_block):
    V = square_interaction(square_block, 1.0)
    problem = ConstrainedSearchProblem(square_poly, V)
    with pytest.raises(ValueError):
        exchange_force(problem, [0.99999], step=1e-3)


def test_gradient_matches_simplex_closed_form(ring6_poly, ring6_nn):
    problem = ConstrainedSearchProblem(ring6_poly, ring6_nn)
    n = np.array([0.6, 0.5, 0.45])
    ev = functional_simplex(ring6_poly, ring6_nn, n)
    order = simplex_facet_order(ring6_poly)
    inc = ring6_poly.incidence_exact()
    Vt = problem.interaction * np.outer(ev.eta, ev.eta)
    np.fill_diagonal(Vt, np.diag(problem.interaction))
    s = np.sqrt(ev.x)
    grad = np.zeros(3)
    for r, j in enumerate(order):
        scale = float(inc[j][r])
        kappa = np.array(ring6_poly.facets[j].coefficients, dtype=float) / scale
        df_dx = Vt[r, r] + float(Vt[r] @ s - Vt[r, r] * s[r]) / s[r]
        grad += df_dx * kappa
    fd = exchange_force(problem, n, step=1e-6)
    assert np.allclose(fd, grad, atol=1e-6)


def test_boundary_expansion_square_weak(square_poly, square_block):
    V = square_interaction(square_block, 0.01)
    problem = ConstrainedSearchProblem(square_poly, V)
    facet_n2_zero = next(j for j, f in enumerate(square_poly.facets)
                         if f.coefficients == (-1,))
    fit = boundary_expansion(problem, facet_n2_zero,
                             distances=np.geomspace(1e-6, 1e-4, 8))
    assert fit.beta == pytest.approx(0.5, abs=0.02)
    assert fit.g / 0.01 == pytest.approx(-np.sqrt(13.0) / 2.0, rel=0.01)
    assert fit.f0 / 0.01 == pytest.approx(0.75, abs=1e-3)
    assert not fit.poor_fit


def test_boundary_expansion_zero_interaction(ring6_poly):
    problem = ConstrainedSearchProblem(ring6_poly, np.zeros((4, 4)))
    fit = boundary_expansion(problem, 0)
    assert fit.g == 0.0 and fit.f0 == 0.0 and not fit.poor_fit


def test_boundary_expansion_ring_random_attractive(ring6_poly, rng):
    A = np.abs(rng.standard_normal((4, 4))) + 0.2
    V = -(A + A.T) / 2
    np.fill_diagonal(V, np.abs(np.diag(A)))
    problem = ConstrainedSearchProblem(ring6_poly, V)
    fit = boundary_expansion(problem, 2)
    assert fit.beta == pytest.approx(0.5, abs=0.02)
    assert not fit.poor_fit


def test_boundary_expansion_input_guards(ring6_poly, ring6_nn):
    problem = ConstrainedSearchProblem(ring6_poly, ring6_nn)
    with pytest.raises(ValueError):
        boundary_expansion(problem, 0, distances=[1e-4, 1e-3, 1e-2])
    with pytest.raises(ValueError):
        boundary_expansion(problem, 0, distances=np.linspace(1e-4, 1e-3, 8))
