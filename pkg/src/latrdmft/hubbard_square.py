"""The four-site Hubbard ring at half filling, end to end.

Four electrons on four sites with on-site repulsion U = u*t.  The ground
state lives in the momentum-index-2, Mz=0 sector, in its three-state
S=0, odd-reflection block.  That block leaves a single independent
occupation number, conventionally n2 (the highest-energy mode); the
chart coordinate of the block polytope is n0 = 1 - n2.

`exact_functional_square` evaluates the interaction functional F(n2) by
eliminating one amplitude through the occupation constraint and
minimizing the resulting one-parameter branch family, a deliberately
separate route from the generic constrained-search solver (the two are
cross-checked in the tests).  Asymptotic closed forms for weak and
strong coupling and the matching ground-state-energy series round out
the module.  Energies are reported in units of the hopping t.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .basis import SectorLabel, adapt_symmetry, enumerate_sector
from .errors import InfeasibleOccupationError
from .functional import ConstrainedSearchProblem
from .model import (SPIN_UP, InteractionSpec, LatticeSpec,
                    build_interaction_matrix, orbital_index)
from .oracle import SectorHamiltonian, ground_state
from .polytope import sector_polytope

N_SITES = 4
N_PARTICLES = 4
MOMENTUM_SECTOR = (2,)


def square_lattice(t: float = 1.0) -> LatticeSpec:
    return LatticeSpec(dimension=1, length=N_SITES, hopping=t, spinful=True)


@lru_cache(maxsize=8)
def square_adapted(t: float = 1.0):
    """The three-state S=0, parity -1 block of the half-filled square."""
    lattice = square_lattice(t)
    sector = enumerate_sector(lattice, N_PARTICLES,
                              SectorLabel(momentum=MOMENTUM_SECTOR, mz=0.0))
    return adapt_symmetry(sector, spin=0.0, parity=-1)


@lru_cache(maxsize=8)
def _square_geometry(t: float = 1.0):
    adapted = square_adapted(t)
    poly = sector_polytope(adapted)
    lattice = adapted.lattice
    q2 = orbital_index(lattice, (2,), SPIN_UP)
    c0, cvec = poly.chart.coordinate_affine(q2)
    return adapted, poly, float(c0), float(cvec[0])


def chart_from_n2(n2: float, t: float = 1.0) -> float:
    """Chart coordinate of the block polytope for a given n2."""
    _, _, c0, c1 = _square_geometry(t)
    return (n2 - c0) / c1


def n2_from_chart(x: float, t: float = 1.0) -> float:
    _, _, c0, c1 = _square_geometry(t)
    return c0 + c1 * x


def square_problem(u: float, t: float = 1.0) -> ConstrainedSearchProblem:
    """Constrained-search problem of the block at coupling U = u*t."""
    adapted, poly, _, _ = _square_geometry(t)
    V = build_interaction_matrix(InteractionSpec.hubbard(u * t), adapted)
    return ConstrainedSearchProblem(poly, V)


def square_ground_state(u: float, t: float = 1.0):
    """(E0, n2) from dense diagonalization of the three-state block."""
    adapted, _, _, _ = _square_geometry(t)
    V = build_interaction_matrix(InteractionSpec.hubbard(u * t), adapted)
    gs = ground_state(SectorHamiltonian.build(adapted, V))
    q2 = orbital_index(adapted.lattice, (2,), SPIN_UP)
    return gs.energy, float(gs.occupations[q2])


# ---------------------------------------------------------------------------
# exact functional by branch elimination
# ---------------------------------------------------------------------------

def _branch_candidates(s, delta_c, branch):
    """Second amplitude from the occupation constraint at fixed first one.

    In the eigenbasis of the block interaction the constraint
    1 - a1*(a2 + sqrt(3)*a3) = 2*n2 with a3^2 = 1 - a1^2 - a2^2 is
    quadratic in a1*a2; `branch` picks its +- root.  The root exists iff
    s*(1-s) >= delta_c^2; the third amplitude is then fixed (with free
    sign) by (2*delta_c - a1*a2)/(sqrt(3)*a1), whose square reproduces
    1 - s - a2^2 identically, so no further feasibility test is needed.
    Returns (a2, valid).
    """
    root = s * (1.0 - s) - delta_c * delta_c
    if root < -1e-15:
        return 0.0, False
    root = max(root, 0.0)
    a2 = (delta_c + branch * np.sqrt(3.0 * root)) / (2.0 * np.sqrt(s))
    return a2, True


def _branch_value(s, delta_c, branch):
    a2, ok = _branch_candidates(s, delta_c, branch)
    return s + 2.0 * a2 * a2 if ok else np.inf


def exact_functional_square(u: float, n2: float, t: float = 1.0,
                            s_tol: float = 1e-13) -> float:
    """Exact interaction functional F(n2) of the half-filled square.

    Minimizes over the one free amplitude after the occupation
    constraint eliminates another; both constraint branches are always
    evaluated and the lower taken, which removes any sensitivity to the
    branch seam at n2 = 1/2.  The minimization is a dense scan plus
    golden-section polish (amplitude tolerance ~ sqrt(s_tol)).
    """
    if not -1e-12 <= n2 <= 1.0 + 1e-12:
        raise InfeasibleOccupationError(f"n2 = {n2} outside [0, 1]")
    n2 = min(max(n2, 0.0), 1.0)
    U = u * t
    if n2 < 1e-15 or n2 > 1.0 - 1e-15:
        # polytope endpoints: a single block state survives
        return 0.75 * U
    delta_c = 0.5 - n2
    if abs(delta_c) < 1e-15:
        return 0.0  # the zero-eigenvalue state alone carries n2 = 1/2
    disc = 1.0 - 4.0 * delta_c * delta_c
    s_lo = 0.5 * (1.0 - np.sqrt(disc))
    s_hi = 0.5 * (1.0 + np.sqrt(disc))

    # grid dense toward both edges, where the minimizers sit in the
    # strong-coupling regime
    m = 160
    edge = np.geomspace(1e-6, 0.5, m // 2)
    ts = np.unique(np.concatenate([edge, 1.0 - edge, np.linspace(0.0, 1.0, m)]))
    grid = s_lo + (s_hi - s_lo) * ts

    best = (np.inf, None, None)
    for branch in (-1.0, 1.0):
        vals = np.array([_branch_value(s, delta_c, branch) for s in grid])
        k = int(np.argmin(vals))
        if vals[k] < best[0]:
            best = (vals[k], k, branch)
    if not np.isfinite(best[0]):
        raise RuntimeError("no feasible amplitude found; constraint data corrupt")
    _, k, branch = best
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _branch_value(c, delta_c, branch)
    fd = _branch_value(d, delta_c, branch)
    while b - a > s_tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _branch_value(c, delta_c, branch)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _branch_value(d, delta_c, branch)
    value = min(fc, fd, _branch_value(grid[k], delta_c, branch))
    return U * float(value)


@dataclass(frozen=True)
class SquareScan:
    """Functional values over an n2 grid at one coupling."""

    u: float
    n2: np.ndarray
    values: np.ndarray
    branches: np.ndarray  # winning constraint branch per point (+-1, 0 at seam)


def scan_functional(u: float, n2_grid, t: float = 1.0) -> SquareScan:
    n2_grid = np.asarray(n2_grid, dtype=float)
    values = np.empty_like(n2_grid)
    branches = np.zeros(len(n2_grid), dtype=int)
    for i, n2 in enumerate(n2_grid):
        values[i] = exact_functional_square(u, n2, t)
        if 1e-15 < n2 < 1 - 1e-15 and abs(n2 - 0.5) > 1e-15:
            delta_c = 0.5 - n2
            disc = np.sqrt(1.0 - 4.0 * delta_c ** 2)
            probe = np.linspace(0.5 * (1 - disc) + 1e-12, 0.5 * (1 + disc) - 1e-12, 50)
            minus = min(_branch_value(s, delta_c, -1.0) for s in probe)
            plus = min(_branch_value(s, delta_c, 1.0) for s in probe)
            branches[i] = -1 if minus <= plus else 1
    return SquareScan(u=u, n2=n2_grid, values=values, branches=branches)


# ---------------------------------------------------------------------------
# asymptotic closed forms
# ---------------------------------------------------------------------------

def asymptotic_functional(u: float, n2: float, regime: str, t: float = 1.0) -> float:
    """Weak or strong coupling closed form of F(n2); no validity policing.

    weak:   U * (3/4 - sqrt(13)/2 * sqrt(n2)),      the n2 -> 0 expansion
    strong: U * (4/3 d^2 + 40/27 d^4), d = 1/2-n2,  the n2 -> 1/2 expansion
    """
    U = u * t
    if regime == "weak":
        return U * (0.75 - 0.5 * np.sqrt(13.0) * np.sqrt(max(n2, 0.0)))
    if regime == "strong":
        d = 0.5 - n2
        return U * ((4.0 / 3.0) * d ** 2 + (40.0 / 27.0) * d ** 4)
    raise ValueError("regime must be 'weak' or 'strong'")


def asymptotic_energy(u: float, regime: str):
    """(E0/t, n2) series of the half-filled square.

    weak:   E0/t = -4 + 3u/4 - 13u^2/128,  n2 = 13u^2/1024
    strong: E0/t = -12/u + 120/u^3,        n2 = 1/2 - 3/u + 60/u^3

    The strong-coupling occupation follows from the stationarity of the
    quartic functional: (8/3)d + (160/27)d^3 = 8/u gives
    d = 3/u - 60/u^3, so the 1/u^3 coefficient of n2 is +60; the sign is
    pinned against exact diagonalization in the tests.
    """
    if regime == "weak":
        if u < 0:
            raise ValueError("weak-coupling series needs u >= 0")
        return (-4.0 + 0.75 * u - 13.0 * u * u / 128.0,
                13.0 * u * u / 1024.0)
    if regime == "strong":
        if u <= 0:
            raise ValueError("strong-coupling series needs u > 0")
        return (-12.0 / u + 120.0 / u ** 3,
                0.5 - 3.0 / u + 60.0 / u ** 3)
    raise ValueError("regime must be 'weak' or 'strong'")


def figure_data(u_values, n2_grid, u_functional: float = 1.0, t: float = 1.0):
    """Tables behind the two standard plots.

    Returns {"functional": (header, rows), "energy": (header, rows)}:
    the exact functional with both asymptotes over the n2 grid at
    u_functional, and the exact ground-state energy against both series
    with the strong-series relative error over the u grid.
    """
    func_header = ["n2", "F_exact", "F_weak", "F_strong"]
    func_rows = []
    for n2 in np.asarray(n2_grid, dtype=float):
        func_rows.append([
            n2,
            exact_functional_square(u_functional, n2, t),
            asymptotic_functional(u_functional, n2, "weak", t),
            asymptotic_functional(u_functional, n2, "strong", t),
        ])
    energy_header = ["u", "E0_exact", "E0_weak", "E0_strong", "rel_err_strong"]
    energy_rows = []
    for u in np.asarray(u_values, dtype=float):
        e_exact, _ = square_ground_state(u, t)
        e_weak, _ = asymptotic_energy(u, "weak")
        e_strong = asymptotic_energy(u, "strong")[0] if u > 0 else np.nan
        rel = abs(e_strong - e_exact) / abs(e_exact) if u > 0 else np.nan
        energy_rows.append([u, e_exact, e_weak, e_strong, rel])
    return {"functional": (func_header, func_rows),
            "energy": (energy_header, energy_rows)}
