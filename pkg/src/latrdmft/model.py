"""Lattices, plane-wave orbitals, dispersions, and interaction matrices.

One-particle states are plane waves labelled by a momentum index vector
nu (componentwise 0..L-1) and, for spinful lattices, a spin projection
m = +1/2 or -1/2.  The global orbital order is lexicographic on (nu, m)
with spin-up before spin-down; this order fixes every determinant sign
in the package.  Interactions are specified in real space and expanded
into momentum-conserving second-quantized strings, so their matrix
elements within a momentum sector are exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidOrbitalError, SectorMismatchError

SPIN_UP = 0.5
SPIN_DOWN = -0.5

HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class LatticeSpec:
    """Periodic one-band lattice: D dimensions, L sites per direction."""

    dimension: int
    length: int
    hopping: float = 1.0
    spinful: bool = False

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.length < 2:
            raise ValueError("length must be >= 2")

    @property
    def n_sites(self) -> int:
        return self.length ** self.dimension

    @property
    def n_spin(self) -> int:
        return 2 if self.spinful else 1

    @property
    def n_orbitals(self) -> int:
        return self.n_sites * self.n_spin

    def momenta(self):
        """All momentum index vectors in lexicographic order."""
        return itertools.product(range(self.length), repeat=self.dimension)


@dataclass(frozen=True)
class SpinMomentumOrbital:
    """Plane-wave spin orbital (nu, m); m is None on spinless lattices."""

    nu: tuple
    m: Optional[float] = None


def orbital_index(lattice: LatticeSpec, nu, m=None) -> int:
    """Global orbital index, lexicographic on (nu, m), spin-up first."""
    nu = tuple(int(x) for x in nu)
    if len(nu) != lattice.dimension or any(not 0 <= x < lattice.length for x in nu):
        raise InvalidOrbitalError(f"momentum index {nu} outside the lattice")
    site = 0
    for x in nu:
        site = site * lattice.length + x
    if not lattice.spinful:
        if m is not None:
            raise InvalidOrbitalError("spin label on a spinless lattice")
        return site
    if m == SPIN_UP:
        return 2 * site
    if m == SPIN_DOWN:
        return 2 * site + 1
    raise InvalidOrbitalError(f"spin projection {m} is not +-1/2")


def orbital_from_index(lattice: LatticeSpec, index: int) -> SpinMomentumOrbital:
    if not 0 <= index < lattice.n_orbitals:
        raise InvalidOrbitalError(f"orbital index {index} out of range")
    if lattice.spinful:
        site, s = divmod(index, 2)
        m = SPIN_UP if s == 0 else SPIN_DOWN
    else:
        site, m = index, None
    nu = []
    for _ in range(lattice.dimension):
        site, x = divmod(site, lattice.length)
        nu.append(x)
    nu.reverse()
    return SpinMomentumOrbital(tuple(nu), m)


def dispersion(lattice: LatticeSpec, orbital) -> float:
    """Nearest-neighbour tight-binding energy -2t sum_i cos(2 pi nu_i / L).

    `orbital` may be a SpinMomentumOrbital, a momentum index vector, or a
    global orbital index.  The energy is spin independent.
    """
    if isinstance(orbital, SpinMomentumOrbital):
        nu = orbital.nu
        orbital_index(lattice, nu, orbital.m)  # validates
    elif isinstance(orbital, (int, np.integer)):
        nu = orbital_from_index(lattice, int(orbital)).nu
    else:
        nu = tuple(int(x) for x in orbital)
        if any(not 0 <= x < lattice.length for x in nu) or len(nu) != lattice.dimension:
            raise InvalidOrbitalError(f"momentum index {nu} outside the lattice")
    L = lattice.length
    return -2.0 * lattice.hopping * float(np.sum(np.cos(2.0 * np.pi * np.asarray(nu) / L)))


def dispersion_vector(lattice: LatticeSpec) -> np.ndarray:
    """Dispersion of every orbital in global order (length n_orbitals)."""
    return np.array([dispersion(lattice, q) for q in range(lattice.n_orbitals)])


def kinetic_functional(lattice: LatticeSpec, occupations) -> float:
    """Kinetic energy sum_q eps_q n_q of a full-length occupation vector."""
    n = np.asarray(occupations, dtype=float)
    if n.shape != (lattice.n_orbitals,):
        raise ValueError(f"expected {lattice.n_orbitals} occupations, got {n.shape}")
    return float(dispersion_vector(lattice) @ n)


# ---------------------------------------------------------------------------
# fermionic operator strings on bit-mask configurations
# ---------------------------------------------------------------------------

def apply_string(mask: int, ops) -> tuple[int, int]:
    """Apply a creation/annihilation string to an occupation bit mask.

    `ops` is a sequence of (dagger, orbital) pairs written operator-style:
    the rightmost pair acts first.  Returns (sign, new_mask); sign 0 means
    the string annihilates the state.
    """
    sign = 1
    for dagger, q in reversed(ops):
        bit = 1 << q
        below = (mask & (bit - 1)).bit_count()
        if dagger:
            if mask & bit:
                return 0, 0
            mask |= bit
        else:
            if not mask & bit:
                return 0, 0
            mask &= ~bit
        if below & 1:
            sign = -sign
    return sign, mask


def mask_of(configuration) -> int:
    mask = 0
    for q in configuration:
        mask |= 1 << int(q)
    return mask


def config_of(mask: int) -> tuple:
    out = []
    q = 0
    while mask:
        if mask & 1:
            out.append(q)
        mask >>= 1
        q += 1
    return tuple(out)


# ---------------------------------------------------------------------------
# interactions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InteractionSpec:
    """Translation-invariant p-particle interaction.

    kind is one of:
      "hubbard"          on-site U sum_i n_{i up} n_{i down} (spinful only)
      "density_density"  sum_d W_d sum_i n_i n_{i+d} with total densities;
                         couplings maps displacement vectors to strengths
      "terms"            explicit second-quantized strings in the momentum
                         orbital basis, each checked for momentum conservation
    """

    kind: str
    strength: float = 0.0
    couplings: tuple = ()
    terms: tuple = ()
    body_count: int = 2

    @staticmethod
    def hubbard(strength: float) -> "InteractionSpec":
        return InteractionSpec(kind="hubbard", strength=float(strength))

    @staticmethod
    def density_density(couplings) -> "InteractionSpec":
        """couplings: {displacement tuple: strength} or a 1-D list [W1, W2, ...]."""
        if isinstance(couplings, dict):
            items = tuple(sorted((tuple(int(i) for i in d), float(w))
                                 for d, w in couplings.items()))
        else:
            items = tuple(((k + 1,), float(w)) for k, w in enumerate(couplings))
        return InteractionSpec(kind="density_density", couplings=items)

    @staticmethod
    def explicit(terms, body_count=None) -> "InteractionSpec":
        """terms: iterable of (coefficient, ((dagger, orbital), ...))."""
        packed = tuple((complex(c), tuple((bool(d), int(q)) for d, q in ops))
                       for c, ops in terms)
        p = body_count if body_count is not None else max(
            (len(ops) // 2 for _, ops in packed), default=1)
        return InteractionSpec(kind="terms", terms=packed, body_count=p)


def _conserving_quadruples(lattice: LatticeSpec):
    """(nu1, nu2, nu3, nu4) with nu1 + nu3 = nu2 + nu4 (mod L per component)."""
    L = lattice.length
    momenta = list(lattice.momenta())
    for nu1, nu2, nu3 in itertools.product(momenta, repeat=3):
        nu4 = tuple((a + c - b) % L for a, b, c in zip(nu1, nu2, nu3))
        yield nu1, nu2, nu3, nu4


def interaction_terms(spec: InteractionSpec, lattice: LatticeSpec):
    """Expand a spec into momentum-space strings [(coeff, ops), ...].

    Built-in kinds come from the real-space definitions via
    c_i = Ns^{-1/2} sum_nu exp(+i k r_i) c_nu, which turns
    sum_i n_i n_{i+d} into Ns^{-1} sum' exp(-i(k3-k4).d) strings over
    momentum-conserving quadruples.
    """
    L = lattice.length
    ns = lattice.n_sites
    terms = []
    if spec.kind == "hubbard":
        if not lattice.spinful:
            raise SectorMismatchError("on-site Hubbard interaction needs a spinful lattice")
        g = spec.strength / ns
        for nu1, nu2, nu3, nu4 in _conserving_quadruples(lattice):
            ops = ((True, orbital_index(lattice, nu1, SPIN_UP)),
                   (False, orbital_index(lattice, nu2, SPIN_UP)),
                   (True, orbital_index(lattice, nu3, SPIN_DOWN)),
                   (False, orbital_index(lattice, nu4, SPIN_DOWN)))
            terms.append((complex(g), ops))
    elif spec.kind == "density_density":
        spins = (SPIN_UP, SPIN_DOWN) if lattice.spinful else (None,)
        for disp, w in spec.couplings:
            if len(disp) != lattice.dimension:
                raise SectorMismatchError(f"displacement {disp} has wrong dimension")
            g = w / ns
            for nu1, nu2, nu3, nu4 in _conserving_quadruples(lattice):
                phase = np.exp(-2j * np.pi * sum((a - b) * d for a, b, d
                                                 in zip(nu3, nu4, disp)) / L)
                for s1 in spins:
                    for s2 in spins:
                        ops = ((True, orbital_index(lattice, nu1, s1)),
                               (False, orbital_index(lattice, nu2, s1)),
                               (True, orbital_index(lattice, nu3, s2)),
                               (False, orbital_index(lattice, nu4, s2)))
                        terms.append((g * phase, ops))
    elif spec.kind == "terms":
        for coeff, ops in spec.terms:
            net = np.zeros(lattice.dimension, dtype=int)
            for dagger, q in ops:
                nu = np.asarray(orbital_from_index(lattice, q).nu)
                net += nu if dagger else -nu
            if np.any(net % L):
                raise SectorMismatchError(
                    f"term {ops} does not conserve total momentum")
            terms.append((complex(coeff), tuple(ops)))
    else:
        raise ValueError(f"unknown interaction kind {spec.kind!r}")
    return terms


def matrix_elements(spec: InteractionSpec, lattice: LatticeSpec,
                    configurations: Sequence[tuple]) -> np.ndarray:
    """<r|V|r'> over an arbitrary list of orbital-index configurations.

    Sign bookkeeping: configurations are occupation strings in the global
    orbital order; each string op carries the parity of occupied orbitals
    below its target.  The result must be Hermitian and, for the built-in
    real-coupling kinds, real; both are checked.
    """
    terms = interaction_terms(spec, lattice)
    masks = [mask_of(c) for c in configurations]
    index = {m: i for i, m in enumerate(masks)}
    if len(index) != len(masks):
        raise SectorMismatchError("duplicate configurations in basis")
    R = len(masks)
    V = np.zeros((R, R), dtype=complex)
    for col, mask in enumerate(masks):
        for coeff, ops in terms:
            sign, out = apply_string(mask, ops)
            if sign:
                row = index.get(out)
                if row is not None:
                    V[row, col] += sign * coeff
    if not np.allclose(V, V.conj().T, atol=HERMITICITY_TOL):
        raise SectorMismatchError("interaction matrix is not Hermitian; "
                                  "check the supplied term list")
    if np.max(np.abs(V.imag)) <= HERMITICITY_TOL:
        return np.ascontiguousarray(V.real)
    return V


def sign_structure(V: np.ndarray, tol: float = 1e-12):
    """Sign vector eta with eta_r eta_r' V_rr' <= 0 for all r != r', if any.

    Works by 2-colouring the sign graph of the off-diagonal elements
    (zeros are unconstrained).  Returns an int array of +-1, or None when
    the graph is frustrated.  Components are seeded with +1.
    """
    V = np.asarray(V)
    R = V.shape[0]
    eta = np.zeros(R, dtype=int)
    for seed in range(R):
        if eta[seed]:
            continue
        eta[seed] = 1
        queue = [seed]
        while queue:
            r = queue.pop()
            for r2 in range(R):
                if r2 == r or abs(V[r, r2]) <= tol:
                    continue
                want = -eta[r] if V[r, r2] > 0 else eta[r]
                if eta[r2] == 0:
                    eta[r2] = want
                    queue.append(r2)
                elif eta[r2] != want:
                    return None
    return eta


@dataclass(frozen=True)
class InteractionMatrix:
    """Hermitian sector matrix of an interaction, with its basis handle."""

    basis: object
    matrix: np.ndarray
    spec: InteractionSpec = None

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("interaction matrix must be square")
        if not np.allclose(m, m.conj().T, atol=1e-10):
            raise ValueError("interaction matrix must be Hermitian")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def build_interaction_matrix(spec: InteractionSpec, basis,
                             gauge: str = "attractive") -> InteractionMatrix:
    """Interaction matrix on a sector or adapted basis.

    For a Slater-determinant sector basis the matrix is returned as
    computed (the global orbital order already fixes all signs).  For an
    adapted basis the rows carry a conventional phase, so by default the
    matrix is returned in the gauge where every off-diagonal element is
    <= 0 whenever a consistent sign pattern exists ("attractive" gauge);
    all functional values are invariant under this choice.  Pass
    gauge="raw" to keep the phases of the stored coefficient rows.
    """
    if len(basis) == 0:
        raise SectorMismatchError("cannot build an interaction matrix on an empty basis")
    lattice = basis.lattice
    parent_configs = getattr(basis, "configurations", None)
    if parent_configs is not None:  # determinant basis
        V = matrix_elements(spec, lattice, parent_configs)
        return InteractionMatrix(basis=basis, matrix=V, spec=spec)
    # adapted basis: conjugate through the recombination coefficients
    parent = basis.parent
    Vdet = matrix_elements(spec, lattice, parent.configurations)
    if np.iscomplexobj(Vdet):
        raise NotImplementedError("complex interaction matrices are not supported")
    C = basis.coefficients
    V = C @ Vdet @ C.T
    V = 0.5 * (V + V.T)
    if gauge == "attractive":
        eta = sign_structure(V)
        if eta is not None:
            off = -np.abs(V)
            np.fill_diagonal(off, np.diag(V))
            V = off
    elif gauge != "raw":
        raise ValueError(f"unknown gauge {gauge!r}")
    return InteractionMatrix(basis=basis, matrix=V, spec=spec)


# ---------------------------------------------------------------------------
# JSON model description
# ---------------------------------------------------------------------------

def model_from_config(config: dict):
    """(lattice, interaction, n_particles) from a validated config dict."""
    lat = config["lattice"]
    lattice = LatticeSpec(dimension=int(lat["D"]), length=int(lat["L"]),
                          hopping=float(lat["t"]), spinful=bool(lat["spinful"]))
    inter = config["interaction"]
    kind = inter["kind"]
    if kind == "hubbard":
        spec = InteractionSpec.hubbard(inter.get("U", 0.0))
    elif kind == "density_density":
        couplings = inter.get("couplings", [])
        if isinstance(couplings, dict):
            couplings = {tuple(int(i) for i in k.split(",")): float(v)
                         for k, v in couplings.items()}
        spec = InteractionSpec.density_density(couplings)
    else:
        spec = InteractionSpec.explicit(
            [(t["coefficient"], [(o[0], o[1]) for o in t["ops"]])
             for t in inter.get("terms", [])])
    return lattice, spec, int(config["particles"])
