import numpy as np
import pytest

from latrdmft.basis import SectorLabel, enumerate_sector
from latrdmft.errors import InvalidOrbitalError, SectorMismatchError
from latrdmft.model import (InteractionSpec, LatticeSpec,
                            build_interaction_matrix, dispersion,
                            dispersion_vector, kinetic_functional,
                            matrix_elements, model_from_config, orbital_index,
                            sign_structure)

from _fock_oracle import FockOracle

SQRT6 = np.sqrt(6.0)


def test_dispersion_values():
    ring6 = LatticeSpec(1, 6, 1.0, spinful=False)
    square = LatticeSpec(1, 4, 1.0, spinful=True)
    assert dispersion(ring6, (0,)) == pytest.approx(-2.0, abs=1e-15)
    assert dispersion(square, (2,)) == pytest.approx(2.0, abs=1e-15)
    assert dispersion(square, (1,)) == pytest.approx(0.0, abs=1e-15)
    # spin independent
    eps = dispersion_vector(square)
    assert np.allclose(eps[0::2], eps[1::2])


def test_dispersion_invalid_orbital():
    ring6 = LatticeSpec(1, 6, 1.0, spinful=False)
    with pytest.raises(InvalidOrbitalError):
        dispersion(ring6, (6,))
    with pytest.raises(InvalidOrbitalError):
        orbital_index(ring6, (0,), 0.5)  # spin label on spinless lattice


def test_kinetic_functional_square_line():
    square = LatticeSpec(1, 4, 1.0, spinful=True)
    for n2 in (0.0, 0.2, 0.5, 0.9):
        n = np.zeros(8)
        for nu, value in ((0, 1 - n2), (1, 0.5), (2, n2), (3, 0.5)):
            n[orbital_index(square, (nu,), 0.5)] = value
            n[orbital_index(square, (nu,), -0.5)] = value
        assert kinetic_functional(square, n) == pytest.approx(
            -8.0 * (0.5 - n2), abs=1e-12)
    assert kinetic_functional(square, np.zeros(8)) == 0.0
    with pytest.raises(ValueError):
        kinetic_functional(square, np.zeros(5))


def test_hubbard_matrix_golden_block(square_block):
    V = build_interaction_matrix(InteractionSpec.hubbard(1.0), square_block)
    target = 0.25 * np.array([[3.0, -1.0, -SQRT6],
                              [-1.0, 3.0, -SQRT6],
                              [-SQRT6, -SQRT6, 6.0]])
    assert np.allclose(V.matrix, target, atol=1e-12)
    w, v = np.linalg.eigh(V.matrix)
    assert np.allclose(np.sort(w), [0.0, 1.0, 2.0], atol=1e-12)
    null = v[:, 0] if v[2, 0] > 0 else -v[:, 0]
    expected = np.sqrt(3.0 / 8.0) * np.array([1.0, 1.0, 2.0 / SQRT6])
    assert np.allclose(null, expected, atol=1e-12)


def test_zero_coupling_gives_zero_matrix(square_block):
    V = build_interaction_matrix(InteractionSpec.hubbard(0.0), square_block)
    assert np.allclose(V.matrix, 0.0)


def test_hubbard_determinant_matrix_vs_fock_oracle(square, square_sector):
    V = build_interaction_matrix(InteractionSpec.hubbard(0.7), square_sector)
    oracle = FockOracle(square)
    ref = oracle.sector_matrix(oracle.hubbard_operator(0.7),
                               square_sector.configurations)
    assert np.allclose(V.matrix, ref, atol=1e-12)


def test_ring_nn_matrix_vs_fock_oracle(ring6, ring6_basis):
    V = build_interaction_matrix(
        InteractionSpec.density_density({(1,): 1.5}), ring6_basis)
    oracle = FockOracle(ring6)
    ref = oracle.sector_matrix(
        oracle.density_density_operator({(1,): 1.5}),
        ring6_basis.configurations)
    assert np.allclose(V.matrix, ref, atol=1e-12)
    assert np.allclose(V.matrix, V.matrix.T, atol=1e-15)


def test_momentum_conservation_blocks(ring6):
    # configurations from two different momentum sectors: the interaction
    # cannot connect them
    b0 = enumerate_sector(ring6, 3, SectorLabel(momentum=(0,)))
    b1 = enumerate_sector(ring6, 3, SectorLabel(momentum=(1,)))
    mixed = b0.configurations + b1.configurations
    V = matrix_elements(InteractionSpec.density_density({(1,): 0.8}),
                        ring6, mixed)
    n0 = len(b0.configurations)
    assert np.max(np.abs(V[:n0, n0:])) < 1e-14
    assert np.max(np.abs(V[n0:, :n0])) < 1e-14


def test_hermiticity_random_term_list(ring6, rng):
    # a Hermitian pair of conserving strings
    terms = [(0.3, ((True, 0), (False, 1), (True, 2), (False, 1))),
             (0.3, ((True, 1), (False, 2), (True, 1), (False, 0)))]
    spec = InteractionSpec.explicit(terms)
    b = enumerate_sector(ring6, 3, SectorLabel(momentum=(0,)))
    V = matrix_elements(spec, ring6, b.configurations)
    assert np.allclose(V, np.conj(V).T, atol=1e-12)


def test_nonconserving_term_rejected(ring6, ring6_basis):
    spec = InteractionSpec.explicit([(1.0, ((True, 0), (False, 1)))])
    with pytest.raises(SectorMismatchError):
        matrix_elements(spec, ring6, ring6_basis.configurations)


def test_hubbard_needs_spin(ring6, ring6_basis):
    with pytest.raises(SectorMismatchError):
        build_interaction_matrix(InteractionSpec.hubbard(1.0), ring6_basis)


def test_sign_structure_cases(square_block):
    V = build_interaction_matrix(InteractionSpec.hubbard(1.0), square_block)
    assert np.array_equal(sign_structure(V.matrix), [1, 1, 1])
    # two nodes with a positive coupling: alternating signs
    V2 = np.array([[0.0, 0.5], [0.5, 0.0]])
    assert np.array_equal(sign_structure(V2), [1, -1])
    # frustrated triangle: all positive off-diagonals admit no pattern
    V3 = np.ones((3, 3))
    assert sign_structure(V3) is None
    # exhaustive check of all eight sign vectors confirms the frustration
    for bits in range(8):
        eta = np.array([1 if bits >> k & 1 else -1 for k in range(3)])
        assert np.any(np.triu(V3 * np.outer(eta, eta), 1) > 0)


def test_model_from_config_roundtrip():
    cfg = {"lattice": {"D": 1, "L": 6, "t": 2.0, "spinful": False},
           "interaction": {"kind": "density_density", "couplings": [0.5, 0.1]},
           "particles": 3}
    lattice, spec, n = model_from_config(cfg)
    assert lattice == LatticeSpec(1, 6, 2.0, False)
    assert spec.couplings == (((1,), 0.5), ((2,), 0.1))
    assert n == 3
