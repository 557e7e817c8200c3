"""Occupation-number representability polytopes, exactly.

The set of occupation vectors reachable by states of one symmetry sector
is the convex hull of the per-state occupation columns (0/1 vertex
vectors for determinant bases).  This module reduces that point set to
an affine chart of independent coordinates, enumerates the facet
inequalities with integer coprime coefficients, and answers membership
and margin queries.  All hull computations run over exact rationals;
0/1 vertex data keeps them tiny.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _rational as rat
from .errors import CapacityError

MEMBERSHIP_TOL = 1e-12

# Desk-scale guards for the brute-force hyperplane scan.
MAX_CHART_DIM = 12
MAX_VERTICES = 512


@dataclass(frozen=True)
class AffineChart:
    """Independent occupation coordinates plus exact affine relations.

    Every full-length occupation vector on the affine hull satisfies
    n = offset + lift @ x where x are the independent coordinates; rows
    of `lift` at independent indices are unit rows.
    """

    independent: tuple
    offset: tuple        # length d, Fractions
    lift: tuple          # d rows, each a length-d_ind tuple of Fractions

    @property
    def dimension(self) -> int:
        return len(self.independent)

    @property
    def full_dimension(self) -> int:
        return len(self.offset)

    def to_full(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lift = np.array([[float(c) for c in row] for row in self.lift])
        off = np.array([float(c) for c in self.offset])
        return off + lift @ x

    def to_chart(self, n_full) -> np.ndarray:
        n_full = np.asarray(n_full, dtype=float)
        return n_full[list(self.independent)]

    def coordinate_affine(self, q: int):
        """(constant, coefficient tuple) expressing n_q over the chart."""
        return self.offset[q], self.lift[q]

    def relations(self):
        """{dependent index: (constant, {independent index: coefficient})}."""
        out = {}
        for q in range(self.full_dimension):
            if q in self.independent:
                continue
            coeffs = {self.independent[k]: c
                      for k, c in enumerate(self.lift[q]) if c != 0}
            out[q] = (self.offset[q], coeffs)
        return out


def affine_chart(vertices) -> AffineChart:
    """Exact affine-hull reduction of a vertex set.

    Independent coordinates are chosen greedily in index order (lowest
    first); every dependent coordinate gets exact rational relation
    coefficients, validated against all vertices.
    """
    verts = rat.as_fraction_matrix(vertices)
    if not verts:
        raise ValueError("need at least one vertex")
    d = len(verts[0])
    v0 = verts[0]
    diffs = [[v[q] - v0[q] for q in range(d)] for v in verts[1:]]

    independent = []
    chosen_cols = []
    for q in range(d):
        col = [row[q] for row in diffs]
        if any(x != 0 for x in col) and not rat.in_row_span(chosen_cols, col):
            independent.append(q)
            chosen_cols.append(col)

    lift = []
    offset = []
    for q in range(d):
        if q in independent:
            row = [Fraction(1) if independent[k] == q else Fraction(0)
                   for k in range(len(independent))]
            lift.append(tuple(row))
            offset.append(Fraction(0))
            continue
        col = [row[q] for row in diffs]
        if chosen_cols:
            system = [[chosen_cols[k][i] for k in range(len(chosen_cols))]
                      for i in range(len(diffs))]
            sol = rat.solve_consistent(system, col)
            if sol is None:
                raise RuntimeError("affine reduction failed; vertex data inconsistent")
        else:
            sol = []
        const = v0[q] - sum((sol[k] * v0[independent[k]]
                             for k in range(len(independent))), start=Fraction(0))
        lift.append(tuple(sol))
        offset.append(const)

    chart = AffineChart(independent=tuple(independent),
                        offset=tuple(offset), lift=tuple(lift))
    for v in verts:  # exact round-trip on every vertex
        x = [v[q] for q in independent]
        for q in range(d):
            rebuilt = offset[q] + sum((lift[q][k] * x[k]
                                       for k in range(len(x))), start=Fraction(0))
            if rebuilt != v[q]:
                raise RuntimeError("affine relations do not reproduce the vertices")
    return chart


@dataclass(frozen=True)
class FacetConstraint:
    """Half-space constant + coeffs . x >= 0 over chart coordinates.

    Coefficients are coprime integers; the inequality is oriented so the
    polytope interior is nonnegative.
    """

    constant: int
    coefficients: tuple
    label: int = 0

    def value(self, x) -> float:
        return float(self.constant) + float(np.dot(self.coefficients,
                                                   np.asarray(x, dtype=float)))

    def value_exact(self, x):
        return Fraction(self.constant) + sum(
            (Fraction(c) * Fraction(xi) for c, xi in zip(self.coefficients, x)),
            start=Fraction(0))


def _chart_points(vertices, chart):
    verts = rat.as_fraction_matrix(vertices)
    return [[v[q] for q in chart.independent] for v in verts]


def facet_enumeration(vertices, chart: AffineChart):
    """All facets of conv(vertices) in the chart, exact and deduplicated.

    Scans hyperplanes through affinely independent chart-dimension-sized
    vertex subsets, keeps the supporting ones, and normalizes to coprime
    integers oriented inward.  Guarded to desk scale; beyond it an
    external hull tool is the right choice.
    """
    points = _chart_points(vertices, chart)
    R = len(points)
    k = chart.dimension
    if k > MAX_CHART_DIM or R > MAX_VERTICES:
        raise CapacityError(
            f"facet scan guarded to dimension {MAX_CHART_DIM} and "
            f"{MAX_VERTICES} vertices (got {k}, {R})")
    if k == 0:
        return []
    seen = set()
    facets = []
    for subset in itertools.combinations(range(R), k):
        system = [[Fraction(1)] + points[i] for i in subset]
        null = rat.nullspace(system)
        if len(null) != 1:
            continue
        coeffs = rat.integerize(null[0])
        values = [coeffs[0] + sum(c * p for c, p in zip(coeffs[1:], pt))
                  for pt in points]
        if all(v >= 0 for v in values):
            pass
        elif all(v <= 0 for v in values):
            coeffs = [-c for c in coeffs]
        else:
            continue
        key = tuple(coeffs)
        if key not in seen:
            seen.add(key)
            facets.append(key)
    facets.sort()
    return [FacetConstraint(constant=c[0], coefficients=tuple(c[1:]), label=j)
            for j, c in enumerate(facets)]


@dataclass(frozen=True)
class RepresentabilityPolytope:
    """Vertex set, chart, facets, and incidence data of one sector.

    `vertices` holds the full-length generator occupations (exact); for
    adapted bases some rows may be non-extreme points of the hull, which
    is harmless for every query here.
    """

    vertices: tuple          # R rows of full-length Fractions
    chart: AffineChart
    facets: tuple

    def __post_init__(self):
        object.__setattr__(self, "_chart_pts",
                           _chart_points(self.vertices, self.chart))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    def chart_vertices(self) -> np.ndarray:
        return np.array([[float(x) for x in p] for p in self._chart_pts])

    def facet_values(self, x) -> np.ndarray:
        return np.array([f.value(x) for f in self.facets])

    def incidence_exact(self):
        return [[f.value_exact(p) for p in self._chart_pts] for f in self.facets]

    def interior_point(self) -> np.ndarray:
        return self.chart_vertices().mean(axis=0)


def build_polytope(vertices) -> RepresentabilityPolytope:
    """Polytope from full-length (rational) vertex rows."""
    verts = tuple(tuple(Fraction(x) for x in v) for v in rat.as_fraction_matrix(vertices))
    chart = affine_chart(verts)
    facets = tuple(facet_enumeration(verts, chart))
    return RepresentabilityPolytope(vertices=verts, chart=chart, facets=facets)


def sector_polytope(basis) -> RepresentabilityPolytope:
    """Polytope of a SectorBasis or AdaptedBasis."""
    cols = basis.occupations_exact()  # d x R
    points = [tuple(col[s] for col in cols) for s in range(len(basis))]
    return build_polytope(points)


def incidence_matrix(polytope: RepresentabilityPolytope) -> np.ndarray:
    """A[j, r] = facet j evaluated at vertex r (exact values as floats)."""
    return np.array([[float(x) for x in row] for row in polytope.incidence_exact()])


def contains(polytope: RepresentabilityPolytope, x,
             tol: float = MEMBERSHIP_TOL):
    """(inside, margin) with margin = min over facets, signed."""
    x = np.asarray(x, dtype=float)
    if x.shape != (polytope.chart.dimension,):
        raise ValueError(f"expected {polytope.chart.dimension} chart coordinates")
    if polytope.n_facets == 0:
        # zero-dimensional chart: membership means matching the single point
        return True, 0.0
    values = polytope.facet_values(x)
    margin = float(values.min())
    return margin >= -tol, margin


def is_simplex(polytope: RepresentabilityPolytope) -> bool:
    """True when every facet misses exactly one vertex and J = R."""
    if polytope.n_facets != polytope.n_vertices:
        return False
    inc = polytope.incidence_exact()
    return all(sum(1 for v in row if v == 0) == polytope.n_vertices - 1
               for row in inc)


def simplex_facet_order(polytope: RepresentabilityPolytope):
    """Facet indices ordered so facet r is the one missing vertex r."""
    if not is_simplex(polytope):
        raise ValueError("polytope is not a simplex")
    inc = polytope.incidence_exact()
    order = [-1] * polytope.n_vertices
    for j, row in enumerate(inc):
        missing = [r for r, v in enumerate(row) if v != 0]
        order[missing[0]] = j
    return order


def simplex_normalized_values(polytope: RepresentabilityPolytope, x) -> np.ndarray:
    """Facet values scaled and ordered so value r is 1 at vertex r.

    On a simplex these are exactly the squared amplitudes of the unique
    sector state with occupations x.
    """
    order = simplex_facet_order(polytope)
    inc = polytope.incidence_exact()
    out = np.empty(polytope.n_vertices)
    for r, j in enumerate(order):
        scale = inc[j][r]  # facet j at its missing vertex r
        out[r] = polytope.facets[j].value(x) / float(scale)
    return out
