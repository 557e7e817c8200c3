"""Symmetry-sector Slater bases and spin/parity adapted recombinations.

A sector is labelled by the total momentum index vector K (componentwise
mod L) and, on spinful lattices, the magnetization Mz.  Its basis is the
lexicographically ordered list of N-orbital configurations; any two of
them differ in at least two orbitals, which makes the one-body density
of every sector state diagonal in the plane-wave basis.

Spin and reflection adaptation is done in exact rational arithmetic:
the S^2 and parity matrices have rational entries, the projector onto a
requested (S, p) block is a polynomial in them, and the block basis is
extracted by Gram-Schmidt over the projector columns.  Coefficient rows
are therefore exact up to a final square-root normalization, and the
squared coefficients (all that downstream occupation maps need) stay
rational.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import _rational as rat
from .errors import NotDiagonalError, SectorMismatchError
from .model import (SPIN_DOWN, SPIN_UP, LatticeSpec, apply_string, mask_of,
                    orbital_from_index, orbital_index)


@dataclass(frozen=True)
class SectorLabel:
    """Symmetry sector (K, Mz) with optional total-spin and parity tags."""

    momentum: tuple
    mz: Optional[float] = None
    spin: Optional[float] = None
    parity: Optional[int] = None

    def __str__(self):
        parts = ["K=" + ",".join(str(k) for k in self.momentum)]
        if self.mz is not None:
            parts.append(f"Mz={self.mz:g}")
        if self.spin is not None:
            parts.append(f"S={self.spin:g}")
        if self.parity is not None:
            parts.append(f"p={self.parity:+d}")
        return " ".join(parts)


def configuration_momentum(lattice: LatticeSpec, config) -> tuple:
    """Total momentum index vector of a configuration, mod L per component."""
    total = np.zeros(lattice.dimension, dtype=int)
    for q in config:
        total += np.asarray(orbital_from_index(lattice, q).nu)
    return tuple(int(x) for x in total % lattice.length)


def configuration_mz(lattice: LatticeSpec, config) -> Optional[float]:
    if not lattice.spinful:
        return None
    return sum(orbital_from_index(lattice, q).m for q in config)


@dataclass(frozen=True)
class SectorBasis:
    """Ordered Slater-determinant basis of one symmetry sector."""

    lattice: LatticeSpec
    n_particles: int
    sector: SectorLabel
    configurations: tuple  # tuples of strictly increasing orbital indices

    def __len__(self):
        return len(self.configurations)

    @property
    def size(self) -> int:
        return len(self.configurations)

    def index_map(self):
        return {mask_of(c): i for i, c in enumerate(self.configurations)}

    def vertex_matrix(self) -> np.ndarray:
        """R x d matrix of 0/1 occupation vectors, one row per configuration."""
        d = self.lattice.n_orbitals
        out = np.zeros((len(self.configurations), d), dtype=int)
        for r, config in enumerate(self.configurations):
            out[r, list(config)] = 1
        return out

    def occupations(self) -> np.ndarray:
        """d x R map from squared amplitudes to occupation numbers."""
        return self.vertex_matrix().T.astype(float)

    def occupations_exact(self):
        return [[Fraction(int(v)) for v in col] for col in self.vertex_matrix().T]


def enumerate_sector(lattice: LatticeSpec, n_particles: int,
                     sector: SectorLabel) -> SectorBasis:
    """All N-orbital configurations with the sector's momentum and Mz.

    Configurations come out in lexicographic order.  An empty sector gives
    an empty basis, not an error.
    """
    d = lattice.n_orbitals
    if not 0 < n_particles <= d:
        raise ValueError(f"particle number {n_particles} outside 1..{d}")
    momentum = tuple(int(k) % lattice.length for k in sector.momentum)
    if len(momentum) != lattice.dimension:
        raise SectorMismatchError("momentum label has wrong dimension")
    if lattice.spinful:
        if sector.mz is None:
            raise SectorMismatchError("spinful sector needs a magnetization label")
        if abs(sector.mz) > n_particles / 2 + 1e-12:
            raise SectorMismatchError(f"|Mz|={abs(sector.mz)} exceeds N/2")
    elif sector.mz is not None:
        raise SectorMismatchError("spinless lattices carry no magnetization label")
    configs = []
    for combo in itertools.combinations(range(d), n_particles):
        if configuration_momentum(lattice, combo) != momentum:
            continue
        if lattice.spinful and configuration_mz(lattice, combo) != sector.mz:
            continue
        configs.append(combo)
    label = SectorLabel(momentum=momentum, mz=sector.mz)
    return SectorBasis(lattice=lattice, n_particles=n_particles,
                       sector=label, configurations=tuple(configs))


def enumerate_all_sectors(lattice: LatticeSpec, n_particles: int):
    """{SectorLabel: SectorBasis} over every nonempty (K, Mz) sector."""
    d = lattice.n_orbitals
    if not 0 < n_particles <= d:
        raise ValueError(f"particle number {n_particles} outside 1..{d}")
    buckets = {}
    for combo in itertools.combinations(range(d), n_particles):
        key = (configuration_momentum(lattice, combo),
               configuration_mz(lattice, combo))
        buckets.setdefault(key, []).append(combo)
    out = {}
    for (momentum, mz), configs in sorted(buckets.items(),
                                          key=lambda kv: (kv[0][0], kv[0][1] or 0)):
        label = SectorLabel(momentum=momentum, mz=mz)
        out[label] = SectorBasis(lattice=lattice, n_particles=n_particles,
                                 sector=label, configurations=tuple(configs))
    return out


def vertex_vectors(basis: SectorBasis) -> np.ndarray:
    """0/1 occupation vector of each configuration (rows sum to N)."""
    if len(basis) == 0:
        raise SectorMismatchError("empty basis has no vertex vectors")
    return basis.vertex_matrix()


# ---------------------------------------------------------------------------
# exact S^2 and parity matrices
# ---------------------------------------------------------------------------

def _spin_squared_exact(basis: SectorBasis):
    """S^2 on the sector basis as a Fraction matrix: S-S+ + Sz(Sz+1)."""
    lattice = basis.lattice
    if not lattice.spinful:
        raise SectorMismatchError("S^2 is defined on spinful lattices only")
    index = basis.index_map()
    R = len(basis)
    mz = Fraction(basis.sector.mz).limit_denominator(2)
    diag = mz * (mz + 1)
    S2 = [[Fraction(0)] * R for _ in range(R)]
    momenta = list(lattice.momenta())
    for col, config in enumerate(basis.configurations):
        S2[col][col] += diag
        mask = mask_of(config)
        for nu in momenta:  # S+ piece: raise a down spin at nu
            up = orbital_index(lattice, nu, SPIN_UP)
            dn = orbital_index(lattice, nu, SPIN_DOWN)
            s1, m1 = apply_string(mask, ((True, up), (False, dn)))
            if not s1:
                continue
            for nu2 in momenta:  # S- piece: lower an up spin at nu2
                up2 = orbital_index(lattice, nu2, SPIN_UP)
                dn2 = orbital_index(lattice, nu2, SPIN_DOWN)
                s2, m2 = apply_string(m1, ((True, dn2), (False, up2)))
                if not s2:
                    continue
                row = index.get(m2)
                if row is None:
                    raise SectorMismatchError("S^2 leaves the sector; basis is inconsistent")
                S2[row][col] += s1 * s2
    return S2


def _parity_exact(basis: SectorBasis):
    """Reflection nu -> -nu (mod L) with determinant re-sorting signs."""
    lattice = basis.lattice
    L = lattice.length
    index = basis.index_map()
    R = len(basis)
    P = [[Fraction(0)] * R for _ in range(R)]
    for col, config in enumerate(basis.configurations):
        mapped = []
        for q in config:
            orb = orbital_from_index(lattice, q)
            nu = tuple((-x) % L for x in orb.nu)
            mapped.append(orbital_index(lattice, nu, orb.m))
        inversions = sum(1 for i in range(len(mapped)) for j in range(i + 1, len(mapped))
                         if mapped[i] > mapped[j])
        row = index.get(mask_of(tuple(sorted(mapped))))
        if row is None:
            raise SectorMismatchError(
                "reflection maps the sector onto a different one (K != -K mod L)")
        P[row][col] = Fraction(-1 if inversions & 1 else 1)
    return P


def _spin_eigenvalue_set(n_particles: int, mz):
    """All S(S+1) values an N-fermion state can carry, as Fractions."""
    two_s_min = n_particles % 2
    two_mz = abs(int(round(2 * mz)))
    two_s_min = max(two_s_min, two_mz)
    values = []
    for two_s in range(two_s_min, n_particles + 1, 2):
        s = Fraction(two_s, 2)
        values.append(s * (s + 1))
    return values


def _eigenprojector(matrix, eigenvalue, eigenvalue_set):
    """Exact projector via Lagrange interpolation on a spectrum superset."""
    R = len(matrix)
    proj = [[Fraction(1) if i == j else Fraction(0) for j in range(R)]
            for i in range(R)]
    for mu in eigenvalue_set:
        if mu == eigenvalue:
            continue
        shifted = [[matrix[i][j] - (mu if i == j else 0) for j in range(R)]
                   for i in range(R)]
        proj = rat.mat_mul(proj, shifted)
        scale = Fraction(1) / (eigenvalue - mu)
        proj = [[x * scale for x in row] for row in proj]
    return proj


@dataclass(frozen=True)
class AdaptedBasis:
    """Orthonormal (S, parity) eigenstates over a parent sector basis.

    coefficients[s, r] is the weight of parent determinant r in adapted
    state s.  Rows are exact rationals divided by the square root of a
    rational norm; squared_coefficients keeps those squares exactly.
    """

    parent: SectorBasis
    coefficients: np.ndarray
    labels: tuple  # (S, parity) per row
    squared_coefficients: tuple = field(repr=False, default=())

    @property
    def lattice(self) -> LatticeSpec:
        return self.parent.lattice

    @property
    def sector(self) -> SectorLabel:
        s = self.parent.sector
        if self.labels:
            spin, par = self.labels[0]
            return SectorLabel(momentum=s.momentum, mz=s.mz,
                               spin=float(spin), parity=int(par))
        return s

    @property
    def n_particles(self) -> int:
        return self.parent.n_particles

    def __len__(self):
        return self.coefficients.shape[0]

    def occupations(self) -> np.ndarray:
        return np.array([[float(x) for x in col] for col in self.occupations_exact()])

    def occupations_exact(self):
        """d x R table of per-state occupations <s|n_q|s>, exact."""
        verts = self.parent.vertex_matrix()
        d = verts.shape[1]
        cols = []
        for q in range(d):
            occ_dets = [r for r in range(verts.shape[0]) if verts[r, q]]
            cols.append([sum((sq[r] for r in occ_dets), start=Fraction(0))
                         for sq in self.squared_coefficients])
        return cols


def adapt_symmetry(basis: SectorBasis, spin: float, parity: int) -> AdaptedBasis:
    """Simultaneous S^2 and reflection eigenbasis of one (S, p) block.

    The block projector is built exactly, so rows reproduce their S^2 and
    parity eigenvalues exactly; an empty block returns an empty basis.
    Rows are ordered by (number of contributing determinants, first
    contributing determinant) and the leading largest-magnitude
    coefficient of each row is made positive.
    """
    if not basis.lattice.spinful:
        raise SectorMismatchError("symmetry adaptation needs a spinful lattice")
    if parity not in (1, -1):
        raise ValueError("parity must be +1 or -1")
    spin_frac = Fraction(spin).limit_denominator(2)
    if spin_frac < abs(Fraction(basis.sector.mz).limit_denominator(2)):
        raise SectorMismatchError("requested S below |Mz| of the sector")
    R = len(basis)
    if R == 0:
        return AdaptedBasis(parent=basis, coefficients=np.zeros((0, 0)), labels=())
    S2 = _spin_squared_exact(basis)
    P = _parity_exact(basis)
    if rat.mat_mul(S2, P) != rat.mat_mul(P, S2):
        raise RuntimeError("S^2 and parity matrices do not commute on this sector")
    eigs = _spin_eigenvalue_set(basis.n_particles, basis.sector.mz)
    target = spin_frac * (spin_frac + 1)
    if target not in eigs:
        return AdaptedBasis(parent=basis, coefficients=np.zeros((0, R)), labels=())
    proj_s = _eigenprojector(S2, target, eigs)
    half = Fraction(1, 2)
    proj_p = [[(P[i][j] * parity + (1 if i == j else 0)) * half for j in range(R)]
              for i in range(R)]
    proj = rat.mat_mul(proj_s, proj_p)
    dim = sum(proj[i][i] for i in range(R))
    if dim.denominator != 1:
        raise RuntimeError("block projector trace is not an integer")
    dim = int(dim)
    if dim == 0:
        return AdaptedBasis(parent=basis, coefficients=np.zeros((0, R)), labels=())

    # Gram-Schmidt over projector columns, exact and unnormalized.
    raw = []
    norms = []
    for j in range(R):
        v = [proj[i][j] for i in range(R)]
        for u, nu_sq in zip(raw, norms):
            overlap = rat.dot(u, v)
            if overlap != 0:
                v = [a - overlap / nu_sq * b for a, b in zip(v, u)]
        if any(x != 0 for x in v):
            raw.append(v)
            norms.append(rat.dot(v, v))
        if len(raw) == dim:
            break
    if len(raw) != dim:
        raise RuntimeError("projector rank does not match its trace")

    for u in raw:  # exact eigenvector checks
        if rat.mat_vec(S2, u) != [target * x for x in u]:
            raise RuntimeError("adapted state fails the exact S^2 eigenvalue check")
        if rat.mat_vec(P, u) != [parity * x for x in u]:
            raise RuntimeError("adapted state fails the exact parity eigenvalue check")

    order = sorted(range(dim), key=lambda k: (
        sum(1 for x in raw[k] if x != 0),
        tuple(i for i, x in enumerate(raw[k]) if x != 0)))
    rows = []
    sq_rows = []
    for k in order:
        u, nsq = raw[k], norms[k]
        squares = [x * x / nsq for x in u]
        peak = max(range(R), key=lambda i: (squares[i], -i))
        if u[peak] < 0:
            u = [-x for x in u]
        scale = 1.0 / float(nsq) ** 0.5
        rows.append([float(x) * scale for x in u])
        sq_rows.append(tuple(squares))
    fspin = float(spin_frac)
    return AdaptedBasis(parent=basis,
                        coefficients=np.array(rows, dtype=float),
                        labels=tuple((fspin, parity) for _ in range(dim)),
                        squared_coefficients=tuple(sq_rows))


def occupation_map(basis) -> np.ndarray:
    """Linear map M with n = M @ (squared amplitudes), shape d x R.

    For determinant bases the columns are the vertex vectors.  For adapted
    bases the columns hold per-state occupations; the construction is only
    valid when the one-body density has no cross terms between adapted
    states, which is verified exactly here.
    """
    if isinstance(basis, SectorBasis):
        if len(basis) == 0:
            raise SectorMismatchError("empty basis has no occupation map")
        return basis.occupations()
    _check_cross_terms(basis)
    return basis.occupations()


def _check_cross_terms(adapted: AdaptedBasis):
    verts = adapted.parent.vertex_matrix()
    C = adapted.coefficients
    R = C.shape[0]
    for s in range(R):
        for s2 in range(s + 1, R):
            cross = (C[s] * C[s2]) @ verts
            if np.max(np.abs(cross)) > 1e-12:
                raise NotDiagonalError(
                    f"adapted states {s} and {s2} give off-diagonal one-body terms")
