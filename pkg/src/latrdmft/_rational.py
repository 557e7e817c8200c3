"""Small exact linear algebra over Fraction entries.

Everything here operates on lists of lists of fractions.Fraction; sizes are
desk scale (tens of rows), so plain Gaussian elimination is adequate and
keeps every polytope and symmetry computation bit-exact.
"""

from fractions import Fraction
from math import gcd

ZERO = Fraction(0)
ONE = Fraction(1)


def as_fraction_matrix(rows):
    return [[Fraction(x) for x in row] for row in rows]


def rref(matrix):
    """Reduced row echelon form. Returns (rref_rows, pivot_columns)."""
    m = [row[:] for row in matrix]
    nrow = len(m)
    ncol = len(m[0]) if nrow else 0
    pivots = []
    r = 0
    for c in range(ncol):
        pivot = next((i for i in range(r, nrow) if m[i][c] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        inv = ONE / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(nrow):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == nrow:
            break
    return m, pivots


def rank(matrix):
    if not matrix:
        return 0
    return len(rref(matrix)[1])


def nullspace(matrix):
    """Basis of {x : matrix @ x = 0} as a list of Fraction vectors."""
    if not matrix:
        return []
    ncol = len(matrix[0])
    red, pivots = rref(matrix)
    free = [c for c in range(ncol) if c not in pivots]
    basis = []
    for fc in free:
        v = [ZERO] * ncol
        v[fc] = ONE
        for r, pc in enumerate(pivots):
            v[pc] = -red[r][fc]
        basis.append(v)
    return basis


def solve_consistent(matrix, rhs):
    """One solution of matrix @ x = rhs; None if the system is inconsistent."""
    if not matrix:
        return None
    ncol = len(matrix[0])
    aug = [row[:] + [b] for row, b in zip(matrix, rhs)]
    red, pivots = rref(aug)
    if ncol in pivots:  # pivot in the rhs column
        return None
    x = [ZERO] * ncol
    for r, pc in enumerate(pivots):
        x[pc] = red[r][ncol]
    return x


def in_row_span(rows, vector):
    """True if vector lies in the linear span of rows."""
    if not rows:
        return all(x == 0 for x in vector)
    return rank(rows) == rank(rows + [vector])


def integerize(vector):
    """Scale a rational vector to coprime integers (content 1).

    The sign is left as-is; callers fix orientation themselves.
    """
    denoms = [f.denominator for f in vector]
    lcm = 1
    for d in denoms:
        lcm = lcm * d // gcd(lcm, d)
    ints = [int(f * lcm) for f in vector]
    g = 0
    for v in ints:
        g = gcd(g, abs(v))
    if g > 1:
        ints = [v // g for v in ints]
    return ints


def dot(u, v):
    return sum((a * b for a, b in zip(u, v)), start=ZERO)


def mat_mul(a, b):
    ncol = len(b[0])
    return [[sum((ar[k] * b[k][c] for k in range(len(ar))), start=ZERO)
             for c in range(ncol)] for ar in a]


def mat_vec(a, v):
    return [dot(row, v) for row in a]
