"""Exact occupation-number interaction functionals for translation-
invariant one-band lattice models: symmetry-sector bases, the polytope
of reachable occupation vectors, constrained-search functionals with
their diverging boundary gradients, and exact-diagonalization oracles.
"""

from .basis import (AdaptedBasis, SectorBasis, SectorLabel, adapt_symmetry,
                    enumerate_all_sectors, enumerate_sector, occupation_map,
                    vertex_vectors)
from .errors import (CapacityError, InfeasibleOccupationError,
                     InvalidOrbitalError, NotDiagonalError,
                     SectorMismatchError)
from .functional import (BoundaryFit, ConstrainedSearchProblem,
                         FunctionalEvaluation, FunctionalOptions,
                         boundary_expansion, exchange_force,
                         functional_ensemble, functional_general,
                         functional_simplex, interior_ray)
from .model import (InteractionMatrix, InteractionSpec, LatticeSpec,
                    SpinMomentumOrbital, build_interaction_matrix, dispersion,
                    dispersion_vector, kinetic_functional, model_from_config,
                    orbital_from_index, orbital_index, sign_structure)
from .oracle import (GroundStateResult, MinimizeResult, SectorHamiltonian,
                     ground_state, levy_brute_force, minimize_total_energy)
from .polytope import (AffineChart, FacetConstraint, RepresentabilityPolytope,
                       affine_chart, build_polytope, contains,
                       facet_enumeration, incidence_matrix, is_simplex,
                       sector_polytope, simplex_normalized_values)

__version__ = "0.1.0"
