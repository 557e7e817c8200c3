"""Exception types shared across the package."""


class InvalidOrbitalError(ValueError):
    """Orbital quantum numbers outside the one-particle space of a lattice."""


class SectorMismatchError(ValueError):
    """Basis, lattice, or sector labels that do not belong together."""


class InfeasibleOccupationError(ValueError):
    """Occupation vector with no N-fermion state in the requested sector."""


class NotDiagonalError(RuntimeError):
    """A basis whose states fail to give a diagonal one-body density."""


class CapacityError(RuntimeError):
    """Problem size beyond the guarded desk scale of the exact algorithms."""
