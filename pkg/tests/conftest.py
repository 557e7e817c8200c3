import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from latrdmft.basis import SectorLabel, adapt_symmetry, enumerate_sector
from latrdmft.model import InteractionSpec, LatticeSpec, build_interaction_matrix
from latrdmft.polytope import sector_polytope


@pytest.fixture(scope="session")
def ring6():
    return LatticeSpec(dimension=1, length=6, hopping=1.0, spinful=False)


@pytest.fixture(scope="session")
def ring6_basis(ring6):
    return enumerate_sector(ring6, 3, SectorLabel(momentum=(0,)))


@pytest.fixture(scope="session")
def ring6_poly(ring6_basis):
    return sector_polytope(ring6_basis)


@pytest.fixture(scope="session")
def ring6_nn(ring6_basis):
    """Nearest-neighbour density-density coupling on the six-site ring."""
    return build_interaction_matrix(
        InteractionSpec.density_density({(1,): 1.5}), ring6_basis)


@pytest.fixture(scope="session")
def square():
    return LatticeSpec(dimension=1, length=4, hopping=1.0, spinful=True)


@pytest.fixture(scope="session")
def square_sector(square):
    return enumerate_sector(square, 4, SectorLabel(momentum=(2,), mz=0.0))


@pytest.fixture(scope="session")
def square_block(square_sector):
    return adapt_symmetry(square_sector, spin=0.0, parity=-1)


@pytest.fixture(scope="session")
def square_poly(square_block):
    return sector_polytope(square_block)


def square_interaction(block, u):
    return build_interaction_matrix(InteractionSpec.hubbard(u), block)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
