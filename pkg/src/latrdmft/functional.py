"""Exact interaction functionals by constrained search over sector states.

The functional at occupations n is the minimum of <psi|V|psi> over sector
states whose one-body density equals n.  With real amplitudes written as
eta_r sqrt(x_r), the search splits into a sign pattern eta in {+-1}^R and
squared amplitudes x on the affine slice {x >= 0, M x = n, sum x = 1}.
On a simplex polytope x is pinned by the facet values and only the sign
minimization remains; in general the slice has extra dimensions and a
projected quasi-Newton active-set solver handles the nonsmooth boundary
x_r = 0, one sign pattern at a time.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from .errors import InfeasibleOccupationError
from .model import sign_structure
from .polytope import (RepresentabilityPolytope, contains, is_simplex,
                       sector_polytope, simplex_normalized_values)

logger = logging.getLogger(__name__)

__all__ = [
    "FunctionalOptions", "FunctionalEvaluation", "ConstrainedSearchProblem",
    "sign_structure", "functional_simplex", "functional_general",
    "functional_ensemble", "exchange_force", "boundary_expansion",
    "interior_ray", "BoundaryFit",
]


@dataclass(frozen=True)
class FunctionalOptions:
    """Tolerances and search effort; defaults suit desk-scale problems."""

    restarts: int = 16
    seed: int = 0
    constraint_tol: float = 1e-10
    value_tol: float = 1e-6
    gradient_tol: float = 1e-11
    snap_tol: float = 1e-10
    membership_tol: float = 1e-12
    exhaustive_sign_limit: int = 20
    greedy_sign_starts: int = 8
    max_outer: int = 80
    max_face_iter: int = 250
    x_init: Optional[np.ndarray] = None


DEFAULT_OPTIONS = FunctionalOptions()


@dataclass
class FunctionalEvaluation:
    """Value and minimizer of one constrained-search evaluation."""

    value: float
    x: np.ndarray                 # squared amplitudes, >= 0, sums to 1
    eta: Optional[np.ndarray]     # sign pattern; None for ensemble states
    converged: bool
    facet_margins: np.ndarray
    n_solves: int = 0
    message: str = ""

    def recomputed_value(self, V) -> float:
        s = np.sqrt(np.maximum(self.x, 0.0))
        psi = s if self.eta is None else self.eta * s
        return float(psi @ np.asarray(V) @ psi)


class ConstrainedSearchProblem:
    """Feasibility machinery shared by repeated evaluations on one sector.

    Couples a polytope (whose generator rows are the per-state occupation
    vectors) with a real symmetric interaction matrix.  Exposes the
    equality system [independent occupation rows; normalization], its
    null-space basis, and the incidence Gram matrix spectrum.
    """

    def __init__(self, polytope: RepresentabilityPolytope, interaction):
        V = np.asarray(getattr(interaction, "matrix", interaction))
        if np.iscomplexobj(V):
            raise NotImplementedError(
                "complex interaction matrices are not supported; "
                "the search assumes real amplitudes")
        V = V.astype(float)
        if V.ndim != 2 or V.shape[0] != V.shape[1]:
            raise ValueError("interaction matrix must be square")
        if V.shape[0] != polytope.n_vertices:
            raise ValueError("interaction matrix size does not match the basis")
        if not np.allclose(V, V.T, atol=1e-10):
            raise ValueError("interaction matrix must be symmetric")
        self.polytope = polytope
        self.interaction = 0.5 * (V + V.T)
        occ = np.array([[float(x) for x in row] for row in polytope.vertices]).T
        self.occupations = occ              # d x R
        ind = list(polytope.chart.independent)
        self.constraints = np.vstack([occ[ind, :], np.ones((1, occ.shape[1]))])
        self.nullspace_basis = null_space(self.constraints)  # R x K
        self._diameter = None

    @property
    def size(self) -> int:
        return self.interaction.shape[0]

    @property
    def chart(self):
        return self.polytope.chart

    def c_matrix(self) -> np.ndarray:
        """Gram matrix A^T A of the facet incidence map."""
        A = np.array([[float(x) for x in row]
                      for row in self.polytope.incidence_exact()])
        return A.T @ A

    def c_spectrum(self):
        """(eigenvalues, eigenvectors) of the incidence Gram matrix."""
        return np.linalg.eigh(self.c_matrix())

    def diameter(self) -> float:
        if self._diameter is None:
            pts = self.polytope.chart_vertices()
            if len(pts) < 2:
                self._diameter = 1.0
            else:
                diff = pts[:, None, :] - pts[None, :, :]
                self._diameter = float(np.sqrt((diff ** 2).sum(-1)).max())
        return self._diameter

    def rhs(self, n_chart) -> np.ndarray:
        return np.concatenate([np.asarray(n_chart, dtype=float), [1.0]])

    def feasible_point(self, n_chart, forced_zero=()):
        """Most-interior feasible x (max min_r x_r); raises if infeasible."""
        R = self.size
        keep = [r for r in range(R) if r not in set(forced_zero)]
        cons = self.constraints[:, keep]
        m = cons.shape[0]
        # variables (x_keep, t): maximize t subject to x_r - t >= 0
        c = np.zeros(len(keep) + 1)
        c[-1] = -1.0
        A_eq = np.hstack([cons, np.zeros((m, 1))])
        b_eq = self.rhs(n_chart)
        A_ub = np.hstack([-np.eye(len(keep)), np.ones((len(keep), 1))])
        b_ub = np.zeros(len(keep))
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=[(0, 1)] * len(keep) + [(0, 1)],
                      method="highs")
        if not res.success:
            raise InfeasibleOccupationError(
                f"no sector state matches the requested occupations ({res.message})")
        x = np.zeros(R)
        x[keep] = np.maximum(res.x[:-1], 0.0)
        return x, float(res.x[-1])


def _as_problem(polytope_or_problem, V=None) -> ConstrainedSearchProblem:
    if isinstance(polytope_or_problem, ConstrainedSearchProblem):
        return polytope_or_problem
    return ConstrainedSearchProblem(polytope_or_problem, V)


# ---------------------------------------------------------------------------
# sign-pattern search for fixed amplitudes
# ---------------------------------------------------------------------------

def _enumerate_signs(R):
    if R == 0:
        return
    for bits in itertools.product((1.0, -1.0), repeat=R - 1):
        yield np.array((1.0,) + bits)


def _best_sign_for_amplitudes(V, s, limit, greedy_starts, rng):
    """Minimize eta^T (V o s s^T) eta over sign patterns; eta[0] fixed +1."""
    R = len(s)
    B = V * np.outer(s, s)
    eta = sign_structure(V)
    if eta is not None:
        eta = eta.astype(float)
        return eta, float(eta @ B @ eta)
    if R <= limit:
        best_eta, best_val = None, np.inf
        block = []
        for eta in _enumerate_signs(R):
            block.append(eta)
            if len(block) == 4096:
                best_eta, best_val = _scan_block(B, block, best_eta, best_val)
                block = []
        if block:
            best_eta, best_val = _scan_block(B, block, best_eta, best_val)
        return best_eta, best_val
    # greedy single-flip descent, a documented heuristic beyond the limit
    best_eta, best_val = None, np.inf
    for start in range(greedy_starts):
        eta = np.ones(R) if start == 0 else rng.choice([-1.0, 1.0], size=R)
        eta[0] = 1.0
        val = float(eta @ B @ eta)
        improved = True
        while improved:
            improved = False
            for r in range(1, R):
                delta = -4.0 * eta[r] * float(B[r] @ eta - B[r, r] * eta[r])
                if delta < -1e-15:
                    eta[r] = -eta[r]
                    val += delta
                    improved = True
        if val < best_val:
            best_eta, best_val = eta.copy(), val
    return best_eta, best_val


def _scan_block(B, block, best_eta, best_val):
    S = np.array(block)
    vals = np.einsum("ij,jk,ik->i", S, B, S)
    i = int(np.argmin(vals))
    if vals[i] < best_val:
        return S[i].copy(), float(vals[i])
    return best_eta, best_val


# ---------------------------------------------------------------------------
# inner minimization over amplitudes at a fixed sign pattern
# ---------------------------------------------------------------------------

def _objective(Vt, x):
    s = np.sqrt(np.maximum(x, 0.0))
    return float(s @ Vt @ s)


def _gradient_free(Vt, x, free):
    """d/dx_r of sum Vt_rr' sqrt(x_r x_r') over the free coordinates (>0)."""
    s = np.sqrt(x[free])
    coupling = Vt[np.ix_(free, free)] @ s - np.diag(Vt)[free] * s
    return np.diag(Vt)[free] + coupling / s


def _face_descent(Vt, x, free, W, scale, opts: FunctionalOptions):
    """BFGS over the null-space coordinates of one face.

    Returns (x, status) with status one of "stationary", "boundary"
    (a coordinate was driven to zero and pinned), or "stalled".
    """
    K = W.shape[1]
    H = np.eye(K)
    g_prev = None
    step_prev = None
    f_cur = _objective(Vt, x)
    free_arr = np.asarray(free)
    for _ in range(opts.max_face_iter):
        g = W.T @ _gradient_free(Vt, x, free)
        if np.linalg.norm(g, np.inf) <= opts.gradient_tol * scale:
            return x, "stationary"
        if g_prev is not None:
            sk, yk = step_prev, g - g_prev
            sy = float(sk @ yk)
            if sy > 1e-12 * np.linalg.norm(sk) * np.linalg.norm(yk):
                Hy = H @ yk
                H = (H + np.outer(sk, sk) * ((sy + float(yk @ Hy)) / sy ** 2)
                     - (np.outer(Hy, sk) + np.outer(sk, Hy)) / sy)
        d = -H @ g
        slope = float(g @ d)
        if slope > -1e-18 * scale:
            H = np.eye(K)
            d = -g
            slope = -float(g @ g)
        step_free = W @ d
        neg = step_free < -1e-16
        alpha_max = np.inf
        if np.any(neg):
            alpha_max = float(np.min(x[free_arr[neg]] / -step_free[neg]))
        alpha = min(1.0, 0.95 * alpha_max)
        hit_boundary = alpha >= 0.95 * alpha_max * (1.0 - 1e-12) and np.isfinite(alpha_max)
        accepted = False
        for _ in range(45):
            x_new = x.copy()
            x_new[free_arr] = x[free_arr] + alpha * step_free
            if x_new[free_arr].min() >= 0.0:
                f_new = _objective(Vt, x_new)
                if f_new <= f_cur + 1e-4 * alpha * slope:
                    accepted = True
                    break
            alpha *= 0.5
            hit_boundary = False
            if alpha * np.abs(step_free).max() < 1e-17:
                break
        if not accepted:
            # progress exhausted; if a coordinate is pulled onto the
            # boundary (positive derivative at tiny x), pin it
            grad = _gradient_free(Vt, x, free)
            tiny = x[free_arr] < 1e-10 * max(1.0, x.max())
            pullers = tiny & (grad > 0)
            if np.any(pullers):
                for r in free_arr[pullers]:
                    x[r] = 0.0
                return x, "boundary"
            return x, "stalled"
        g_prev, step_prev = g, alpha * d
        x, f_cur = x_new, f_new
        if hit_boundary:
            floor = 1e-12 * max(1.0, x.max())
            blocked = free_arr[x[free_arr] <= floor]
            if blocked.size:
                for r in blocked:
                    x[r] = 0.0
                return x, "boundary"
    return x, "stalled"


def _refeasible(cons, rhs, x, free):
    """Least-squares correction of the free coordinates onto the slice."""
    resid = rhs - cons[:, free] @ x[free]
    if np.max(np.abs(resid)) < 1e-14:
        return x
    corr, *_ = np.linalg.lstsq(cons[:, free], resid, rcond=None)
    x = x.copy()
    x[free] += corr
    return x


def _column_in_span(cons, free, r):
    if not free:
        return not np.any(np.abs(cons[:, r]) > 1e-12)
    sol, *_ = np.linalg.lstsq(cons[:, free], cons[:, r], rcond=None)
    resid = cons[:, free] @ sol - cons[:, r]
    return float(np.max(np.abs(resid))) < 1e-10


def _inner_minimize(Vt, cons, rhs, x_start, forced, opts: FunctionalOptions):
    """Minimize sum Vt_rr' sqrt(x_r x_r') on {x >= 0, cons x = rhs}.

    Active-set outer loop around `_face_descent`.  Pinned coordinates are
    released when their one-sided sqrt coefficient 2 sum_r' Vt_rr'
    sqrt(x_r') is negative (the derivative at x_r = 0+ is then -inf) and
    the face geometry actually lets them grow.
    """
    R = len(x_start)
    scale = 1.0 + float(np.abs(Vt).max())
    ztol = 1e-13
    x = np.maximum(np.asarray(x_start, dtype=float).copy(), 0.0)
    for r in forced:
        x[r] = 0.0
    active = set(forced) | {r for r in range(R) if x[r] <= ztol}
    converged = False
    release_budget = 4 * R + 8
    f_prev = np.inf

    for _ in range(opts.max_outer):
        free = [r for r in range(R) if r not in active]
        if not free:
            converged = True
            break
        for r in active:
            x[r] = 0.0
        x = _refeasible(cons, rhs, x, free)
        if x[free].min() < -1e-9:
            worst = min(free, key=lambda r: x[r])
            x[worst] = 0.0
            active.add(worst)
            continue
        x[free] = np.maximum(x[free], 0.0)
        newly = {r for r in free if x[r] <= ztol}
        if newly:
            for r in newly:
                x[r] = 0.0
            active |= newly
            continue
        W = null_space(cons[:, free])
        status = "stationary"
        if W.size:
            x, status = _face_descent(Vt, x, free, W, scale, opts)
            if status == "boundary":
                active |= {r for r in free if x[r] <= ztol}
                continue
        f_cur = _objective(Vt, x)
        if status == "stalled":
            if f_cur < f_prev - 1e-15 * scale:
                f_prev = f_cur
                continue
            converged = False
            break
        f_prev = f_cur
        # face-stationary: release the most profitable pinned coordinate
        sqrt_x = np.sqrt(np.maximum(x, 0.0))
        release, release_score = None, -1e-11 * scale
        for r in sorted(active - set(forced)):
            if not _column_in_span(cons, free, r):
                continue
            c_r = 2.0 * float(Vt[r, free] @ sqrt_x[free])
            score = c_r if abs(c_r) > 1e-11 * scale else Vt[r, r]
            if score < release_score:
                release, release_score = r, score
        if release is None or release_budget <= 0:
            converged = True
            break
        release_budget -= 1
        active.discard(release)
    return x, _objective(Vt, x), converged


# ---------------------------------------------------------------------------
# public functional evaluations
# ---------------------------------------------------------------------------

def functional_simplex(polytope, V, n_chart,
                       options: FunctionalOptions = DEFAULT_OPTIONS) -> FunctionalEvaluation:
    """Closed-form functional on a simplex sector.

    On a simplex the normalized facet values at n are the squared
    amplitudes themselves, so only the sign pattern is minimized:
    exhaustively up to the configured size, with the consistent-sign
    shortcut when the off-diagonal sign graph is bipartite.
    """
    V = np.asarray(getattr(V, "matrix", V), dtype=float)
    if not is_simplex(polytope):
        raise ValueError("polytope is not a simplex; use functional_general")
    inside, margin = contains(polytope, n_chart,
                              max(options.membership_tol, options.snap_tol))
    if not inside:
        raise InfeasibleOccupationError(
            f"occupations outside the polytope (margin {margin:.3e})")
    x = np.maximum(simplex_normalized_values(polytope, n_chart), 0.0)
    total = x.sum()
    if abs(total - 1.0) > 1e-9:
        raise RuntimeError("simplex amplitudes do not normalize; bad polytope data")
    x /= total
    rng = np.random.default_rng(options.seed)
    eta, value = _best_sign_for_amplitudes(
        V, np.sqrt(x), options.exhaustive_sign_limit, options.greedy_sign_starts, rng)
    return FunctionalEvaluation(value=value, x=x, eta=eta, converged=True,
                                facet_margins=polytope.facet_values(n_chart),
                                n_solves=1)


def functional_general(polytope, V=None, n_chart=None,
                       options: FunctionalOptions = DEFAULT_OPTIONS) -> FunctionalEvaluation:
    """Constrained-search functional on an arbitrary sector polytope.

    Outer loop over sign patterns: a single consistent pattern when the
    off-diagonal sign graph is bipartite (the inner problem is then
    convex), otherwise exhaustive up to the configured size with
    lambda_min pruning, then greedy sign flips beyond.  The inner solve
    is the active-set projected quasi-Newton of `_inner_minimize` with
    deterministic multi-start.  Occupations within snap tolerance of a
    facet are solved on that facet, off-facet amplitudes forced to zero.
    """
    problem = _as_problem(polytope, V)
    Vm = problem.interaction
    poly = problem.polytope
    n_chart = np.asarray(n_chart, dtype=float)
    inside, margin = contains(poly, n_chart,
                              max(options.membership_tol, options.snap_tol))
    if not inside:
        raise InfeasibleOccupationError(
            f"occupations outside the polytope (margin {margin:.3e})")
    margins = poly.facet_values(n_chart) if poly.n_facets else np.zeros(0)

    # snap onto near-active facets (jointly, by least-squares projection
    # onto their intersection) and force off-facet amplitudes to zero
    n_work = n_chart.copy()
    forced = set()
    if poly.n_facets:
        near = [j for j in range(poly.n_facets) if margins[j] < options.snap_tol]
        if near:
            K = np.array([poly.facets[j].coefficients for j in near], dtype=float)
            vals = np.array([poly.facets[j].value(n_work) for j in near])
            delta, *_ = np.linalg.lstsq(K, -vals, rcond=None)
            n_work = n_work + delta
            inc = poly.incidence_exact()
            for j in near:
                forced |= {r for r in range(poly.n_vertices) if inc[j][r] != 0}

    x0, _ = problem.feasible_point(n_work, forced)
    rng = np.random.default_rng(options.seed)
    keep = [r for r in range(problem.size) if r not in forced]
    if not keep:
        raise InfeasibleOccupationError("all amplitudes forced to zero; no state left")
    cons = problem.constraints
    rhs = problem.rhs(n_work)

    state = {"best": None, "solves": 0}

    def run(eta, x_init) -> float:
        Vt = Vm * np.outer(eta, eta)
        np.fill_diagonal(Vt, np.diag(Vm))
        x, val, ok = _inner_minimize(Vt, cons, rhs, x_init, forced, options)
        state["solves"] += 1
        if state["best"] is None or val < state["best"][1]:
            state["best"] = (np.asarray(eta, dtype=float).copy(), val, x, ok)
        return val

    start = options.x_init if options.x_init is not None else x0
    eta_struct = sign_structure(Vm)
    if eta_struct is not None:
        # consistent pattern: globally optimal for every x, inner convex
        run(eta_struct.astype(float), start)
        if options.x_init is not None:
            run(eta_struct.astype(float), x0)
    elif len(keep) <= options.exhaustive_sign_limit:
        patterns = []
        for eta in _sign_patterns_for(problem.size, keep):
            Vt = Vm * np.outer(eta, eta)
            np.fill_diagonal(Vt, np.diag(Vm))
            bound = float(np.linalg.eigvalsh(Vt[np.ix_(keep, keep)])[0])
            patterns.append((bound, eta))
        patterns.sort(key=lambda be: be[0])
        for bound, eta in patterns:
            if state["best"] is not None and bound >= state["best"][1] - 1e-12:
                break
            run(eta, start)
        extra = _feasible_samples(problem, x0, rng, options.restarts - 1, forced)
        for _, eta in patterns[:3]:
            for xs in extra:
                if state["best"] is not None and _lambda_min_bound(
                        Vm, eta, keep) >= state["best"][1] - 1e-12:
                    break
                run(eta, xs)
    else:
        # greedy single-flip descent over sign patterns (heuristic)
        for attempt in range(options.greedy_sign_starts):
            eta = np.ones(problem.size) if attempt == 0 \
                else rng.choice([-1.0, 1.0], size=problem.size)
            eta[keep[0]] = 1.0
            val = run(eta, start)
            improved = True
            while improved:
                improved = False
                for r in keep[1:]:
                    trial = eta.copy()
                    trial[r] = -trial[r]
                    tval = run(trial, start)
                    if tval < val - 1e-12:
                        eta, val = trial, tval
                        improved = True

    eta_best, val, x, ok = state["best"]
    # extra restarts when the winning pattern leaves repulsive couplings
    Vt = Vm * np.outer(eta_best, eta_best)
    off = Vt - np.diag(np.diag(Vt))
    if eta_struct is None and np.any(off > 1e-12):
        for xs in _feasible_samples(problem, x0, rng, options.restarts // 2, forced):
            run(eta_best, xs)
        eta_best, val, x, ok = state["best"]

    feas = float(np.max(np.abs(cons @ x - rhs)))
    if feas > options.constraint_tol:
        ok = False
    return FunctionalEvaluation(value=val, x=x, eta=eta_best, converged=ok,
                                facet_margins=margins, n_solves=state["solves"])


def _lambda_min_bound(Vm, eta, keep):
    Vt = Vm * np.outer(eta, eta)
    np.fill_diagonal(Vt, np.diag(Vm))
    return float(np.linalg.eigvalsh(Vt[np.ix_(keep, keep)])[0])


def _sign_patterns_for(R, keep):
    for eta_k in _enumerate_signs(len(keep)):
        eta = np.ones(R)
        eta[keep] = eta_k
        yield eta


def _feasible_samples(problem, x0, rng, count, forced):
    """Random strictly feasible points around x0, deterministic in the rng."""
    W = problem.nullspace_basis
    if W.size == 0 or count <= 0:
        return []
    out = []
    for _ in range(count):
        step = W @ rng.standard_normal(W.shape[1])
        if forced:
            step[list(forced)] = 0.0
        neg = step < -1e-16
        pos = step > 1e-16
        cap = np.inf
        if np.any(neg):
            cap = min(cap, float(np.min(x0[neg] / -step[neg])))
        if np.any(pos):
            cap = min(cap, float(np.min((1.0 - x0[pos]) / step[pos])))
        if not np.isfinite(cap) or cap <= 0:
            continue
        out.append(np.maximum(x0 + rng.uniform(0.05, 0.9) * cap * step, 0.0))
    return out


def functional_ensemble(basis_or_polytope, V, n_chart,
                        options: FunctionalOptions = DEFAULT_OPTIONS) -> FunctionalEvaluation:
    """Ensemble-search functional: minimize Tr(V Gamma) over mixed states.

    Gamma ranges over unit-trace positive matrices whose diagonal maps to
    the requested occupations.  Implemented by a low-rank factorization
    Gamma = B B^T with rank min(R, chart dimension + 2), minimized by
    SLSQP from deterministic feasible starts.
    """
    from scipy.optimize import minimize

    if isinstance(basis_or_polytope, (RepresentabilityPolytope, ConstrainedSearchProblem)):
        problem = _as_problem(basis_or_polytope, V)
    else:
        problem = ConstrainedSearchProblem(sector_polytope(basis_or_polytope), V)
    Vm = problem.interaction
    R = problem.size
    n_chart = np.asarray(n_chart, dtype=float)
    x0, _ = problem.feasible_point(n_chart)
    cons = problem.constraints
    rhs = problem.rhs(n_chart)
    K = min(R, problem.chart.dimension + 2)
    rng = np.random.default_rng(options.seed)

    def objective(flat):
        B = flat.reshape(R, K)
        VB = Vm @ B
        return float(np.sum(B * VB)), (2.0 * VB).ravel()

    def cons_fun(flat):
        B = flat.reshape(R, K)
        return cons @ (B * B).sum(axis=1) - rhs

    def cons_jac(flat):
        B = flat.reshape(R, K)
        return np.stack([(2.0 * row[:, None] * B).ravel() for row in cons])

    sqrt_x0 = np.sqrt(np.maximum(x0, 0.0))
    starts = []
    for _ in range(max(2, options.restarts // 2)):
        rows = rng.standard_normal((R, K))
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        starts.append((sqrt_x0[:, None] * rows).ravel())
    slsqp = dict(jac=True, method="SLSQP",
                 constraints=[{"type": "eq", "fun": cons_fun, "jac": cons_jac}])
    best = None
    for s0 in starts:
        res = minimize(objective, s0, options={"maxiter": 400, "ftol": 1e-14}, **slsqp)
        if float(np.max(np.abs(cons_fun(res.x)))) > 1e-8:
            continue
        if best is None or res.fun < best[0]:
            best = (float(res.fun), res.x)
    if best is None:
        raise InfeasibleOccupationError("ensemble search found no feasible factorization")
    res = minimize(objective, best[1], options={"maxiter": 600, "ftol": 1e-16}, **slsqp)
    if float(np.max(np.abs(cons_fun(res.x)))) <= 1e-8 and res.fun < best[0]:
        best = (float(res.fun), res.x)
    value, flat = best
    B = flat.reshape(R, K)
    margins = (problem.polytope.facet_values(n_chart)
               if problem.polytope.n_facets else np.zeros(0))
    return FunctionalEvaluation(value=value, x=(B * B).sum(axis=1), eta=None,
                                converged=True, facet_margins=margins,
                                n_solves=len(starts) + 1)


def exchange_force(problem: ConstrainedSearchProblem, n_chart, step: float = None,
                   options: FunctionalOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Central-difference gradient dF/dn over the chart coordinates.

    The evaluation at n seeds the shifted evaluations, keeping the sign
    branch continuous.  Steps crossing the boundary raise ValueError.
    """
    n_chart = np.asarray(n_chart, dtype=float)
    if step is None:
        step = 1e-5 * problem.diameter()
    base = functional_general(problem, None, n_chart, options)
    warm = replace(options, x_init=base.x)
    grad = np.zeros(len(n_chart))
    for k in range(len(n_chart)):
        values = []
        for sgn in (+1.0, -1.0):
            n_s = n_chart.copy()
            n_s[k] += sgn * step
            inside, margin = contains(problem.polytope, n_s, options.membership_tol)
            if not inside or margin <= options.snap_tol:
                raise ValueError(
                    f"step {step:g} along coordinate {k} crosses the boundary; "
                    "reduce the step")
            values.append(functional_general(problem, None, n_s, warm).value)
        grad[k] = (values[0] - values[1]) / (2.0 * step)
    return grad


@dataclass(frozen=True)
class BoundaryFit:
    """Fit F(eps) = f0 + g * eps^beta along a ray hitting one facet."""

    f0: float
    g: float
    beta: float
    residual: float
    poor_fit: bool
    facet: int
    distances: np.ndarray
    values: np.ndarray


def interior_ray(polytope: RepresentabilityPolytope, facet: int):
    """(base point inside the facet, direction with unit facet-value rate)."""
    inc = polytope.incidence_exact()
    tight = [r for r, v in enumerate(inc[facet]) if v == 0]
    if not tight:
        raise ValueError(f"facet {facet} has no tight vertices")
    pts = polytope.chart_vertices()
    base = pts[tight].mean(axis=0)
    center = pts.mean(axis=0)
    direction = center - base
    kappa = np.asarray(polytope.facets[facet].coefficients, dtype=float)
    rate = float(kappa @ direction)
    if rate <= 1e-14:
        raise ValueError("ray direction does not enter the polytope")
    return base, direction / rate


def boundary_expansion(problem: ConstrainedSearchProblem, facet: int,
                       distances=None, path=None,
                       options: FunctionalOptions = DEFAULT_OPTIONS) -> BoundaryFit:
    """Square-root expansion of the functional approaching one facet.

    Samples F along an interior ray at geometrically spaced facet
    distances, then fits F = f0 + g * eps^beta through the log of the
    consecutive differences.  The distances must be geometric and at
    least six; evaluations are warm-started along the ray.
    """
    poly = problem.polytope
    if path is None:
        base, direction = interior_ray(poly, facet)
    else:
        base, direction = (np.asarray(v, dtype=float) for v in path)
    if distances is None:
        distances = np.geomspace(1e-6, 1e-3, 8)
    eps = np.sort(np.asarray(distances, dtype=float))
    if len(eps) < 6:
        raise ValueError("need at least six sample distances")
    ratios = eps[1:] / eps[:-1]
    if np.max(np.abs(ratios - ratios[0])) > 1e-9 * ratios[0]:
        raise ValueError("distances must be geometrically spaced")
    rho = float(ratios[0])

    values = []
    warm = options
    for e in eps:
        point = base + e * direction
        inside, _ = contains(poly, point, options.membership_tol)
        if not inside:
            raise ValueError("ray leaves the polytope; shrink the distances")
        ev = functional_general(problem, None, point, warm)
        warm = replace(options, x_init=ev.x)
        values.append(ev.value)
    F = np.array(values)

    dF = np.diff(F)
    scale = 1.0 + float(np.abs(problem.interaction).max())
    if np.max(np.abs(dF)) < 1e-13 * scale:
        return BoundaryFit(f0=float(F.mean()), g=0.0, beta=float("nan"),
                           residual=0.0, poor_fit=False, facet=facet,
                           distances=eps, values=F)
    if np.any(dF > 0) and np.any(dF < 0):
        return BoundaryFit(f0=float(F[0]), g=float("nan"), beta=float("nan"),
                           residual=float("inf"), poor_fit=True, facet=facet,
                           distances=eps, values=F)
    beta = float(np.polyfit(np.log(eps[:-1]), np.log(np.abs(dF)), 1)[0])
    # with beta fixed, (f0, g) come from a linear fit; the eps^(2 beta)
    # column absorbs the next order of the expansion.  Subtracting that
    # estimated term and re-fitting removes its bias on beta itself.
    coeffs = np.zeros(3)
    for _ in range(4):
        design = np.vstack([np.ones_like(eps), eps ** beta, eps ** (2 * beta)]).T
        coeffs, *_ = np.linalg.lstsq(design, F, rcond=None)
        dFc = np.diff(F - coeffs[2] * eps ** (2 * beta))
        if np.any(dFc > 0) == np.any(dFc < 0):  # mixed signs: stop refining
            break
        beta = float(np.polyfit(np.log(eps[:-1]), np.log(np.abs(dFc)), 1)[0])
    design = np.vstack([np.ones_like(eps), eps ** beta, eps ** (2 * beta)]).T
    coeffs, *_ = np.linalg.lstsq(design, F, rcond=None)
    f0, g = float(coeffs[0]), float(coeffs[1])
    model = design @ coeffs
    residual = float(np.max(np.abs(F - model))
                     / (abs(g) * eps[-1] ** beta + 1e-300))
    return BoundaryFit(f0=f0, g=g, beta=beta, residual=residual,
                       poor_fit=residual > 0.05, facet=facet,
                       distances=eps, values=F)
