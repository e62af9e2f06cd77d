"""
Exact integer normal forms.

Smith normal form with unimodular transforms, row Hermite normal form,
integer kernels and the Frobenius (symplectic) reduction of skew-symmetric
integer matrices. All arithmetic is over Python integers through sympy
matrices, so results are exact for any entry size.
"""

import logging
from typing import List, Tuple

from sympy import Integer, Matrix, Rational, eye, zeros

from utils.errors import DegenerateLattice, DimensionError, NotIntegral

logger = logging.getLogger("esm.algebra.integer_forms")


def as_integer_matrix(m, what: str = "matrix") -> Matrix:
    """
    Convert to a mutable sympy matrix with integer entries.

    Raises:
        NotIntegral: if some entry is not an integer
    """
    mat = Matrix(m).applyfunc(Rational)
    for entry in mat:
        if not entry.is_integer:
            raise NotIntegral(f"{what} has non-integer entry {entry}")
    return mat.applyfunc(Integer)


def is_unimodular(m) -> bool:
    """True iff m is a square integer matrix with determinant +1 or -1."""
    mat = Matrix(m)
    if not mat.is_square:
        return False
    if any(not Rational(x).is_integer for x in mat):
        return False
    return abs(mat.det()) == 1


def add_column(m: Matrix, target: int, source: int, c) -> None:
    """In place: column target += c * column source (target != source)."""
    m.col_op(target, lambda v, i: v + c * m[i, source])


# Smith normal form

def _move_least_to_start(a: Matrix, left: Matrix, right: Matrix, s: int) -> bool:
    """Move the least nonzero entry of the lower-right block to (s, s)."""
    rows, cols = a.shape
    pos = None
    best = None
    for i in range(s, rows):
        for j in range(s, cols):
            if a[i, j] != 0 and (best is None or abs(a[i, j]) < best):
                best = abs(a[i, j])
                pos = (i, j)
    if pos is None:
        return False
    if pos[0] != s:
        a.row_swap(s, pos[0])
        left.row_swap(s, pos[0])
    if pos[1] != s:
        a.col_swap(s, pos[1])
        right.col_swap(s, pos[1])
    return True


def _clear_edging(a: Matrix, left: Matrix, right: Matrix, s: int) -> bool:
    """Reduce row s and column s modulo the pivot; True if they became zero."""
    rows, cols = a.shape
    pivot = a[s, s]
    for i in range(s + 1, rows):
        if a[i, s] != 0:
            q = a[i, s] // pivot
            a.zip_row_op(i, s, lambda v, u: v - q * u)
            left.zip_row_op(i, s, lambda v, u: v - q * u)
    for j in range(s + 1, cols):
        if a[s, j] != 0:
            q = a[s, j] // pivot
            add_column(a, j, s, -q)
            add_column(right, j, s, -q)
    edge_rows = any(a[i, s] != 0 for i in range(s + 1, rows))
    edge_cols = any(a[s, j] != 0 for j in range(s + 1, cols))
    return not (edge_rows or edge_cols)


def _find_non_divisible(a: Matrix, s: int):
    rows, cols = a.shape
    pivot = a[s, s]
    for i in range(s + 1, rows):
        for j in range(s + 1, cols):
            if a[i, j] % pivot != 0:
                return i
    return None


def smith_normal_form(m) -> Tuple[Matrix, Matrix, Matrix]:
    """
    Smith normal form with transforms.

    Args:
        m: Integer matrix A (m x n)

    Returns:
        (D, U, W) with U*A*W = D, U and W unimodular, D diagonal with
        nonnegative entries d_1 | d_2 | ... followed by zeros
    """
    a = as_integer_matrix(m).copy()
    rows, cols = a.shape
    left = eye(rows)
    right = eye(cols)

    for s in range(min(rows, cols)):
        while True:
            if not _move_least_to_start(a, left, right, s):
                return a, left, right
            if not _clear_edging(a, left, right, s):
                continue
            bad_row = _find_non_divisible(a, s)
            if bad_row is None:
                break
            a.zip_row_op(s, bad_row, lambda v, u: v + u)
            left.zip_row_op(s, bad_row, lambda v, u: v + u)
        if a[s, s] < 0:
            a.row_op(s, lambda v, _: -v)
            left.row_op(s, lambda v, _: -v)
    return a, left, right


def smith_divisors(m) -> List[int]:
    """Nonzero diagonal entries of the Smith normal form."""
    d, _, _ = smith_normal_form(m)
    return [int(d[i, i]) for i in range(min(d.shape)) if d[i, i] != 0]


def integer_kernel(m) -> Matrix:
    """
    Basis (as columns) of the integer kernel {x in Z^n : A x = 0}.

    The last n - r columns of W in U*A*W = D span it.
    """
    a = as_integer_matrix(m)
    d, _, right = smith_normal_form(a)
    rank = sum(1 for i in range(min(d.shape)) if d[i, i] != 0)
    return right[:, rank:]


# Hermite normal form

def row_hermite_normal_form(m) -> Matrix:
    """
    Row-style Hermite normal form of an integer matrix.

    The rows of the result generate the same Z-module as the rows of m;
    pivots are positive and entries above a pivot are reduced into
    [0, pivot). Zero rows are dropped.
    """
    a = as_integer_matrix(m).copy()
    rows, cols = a.shape
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        while True:
            candidates = [i for i in range(r, rows) if a[i, c] != 0]
            if not candidates:
                break
            piv = min(candidates, key=lambda i: (abs(a[i, c]), i))
            if piv != r:
                a.row_swap(r, piv)
            done = True
            for i in range(r + 1, rows):
                if a[i, c] != 0:
                    q = a[i, c] // a[r, c]
                    a.zip_row_op(i, r, lambda v, u: v - q * u)
                    if a[i, c] != 0:
                        done = False
            if done:
                break
        if a[r, c] == 0:
            continue
        if a[r, c] < 0:
            a.row_op(r, lambda v, _: -v)
        for i in range(r):
            q = a[i, c] // a[r, c]
            if q != 0:
                a.zip_row_op(i, r, lambda v, u: v - q * u)
        r += 1
    return a[:r, :]


def same_lattice(basis_a, basis_b) -> bool:
    """True iff the columns of the two basis matrices span the same lattice."""
    ha = row_hermite_normal_form(Matrix(basis_a).T)
    hb = row_hermite_normal_form(Matrix(basis_b).T)
    return ha == hb


# Frobenius reduction of skew forms

class _SkewReducer:
    """Integer basis changes on a skew-symmetric matrix, tracking P."""

    def __init__(self, gram: Matrix):
        self.a = gram.copy()
        self.p = eye(gram.shape[0])

    def swap(self, i: int, j: int) -> None:
        if i == j:
            return
        self.a.row_swap(i, j)
        self.a.col_swap(i, j)
        self.p.col_swap(i, j)

    def negate(self, i: int) -> None:
        self.a.row_op(i, lambda v, _: -v)
        self.a.col_op(i, lambda v, _: -v)
        self.p.col_op(i, lambda v, _: -v)

    def add(self, k: int, l: int, c) -> None:
        """Replace basis vector e_k by e_k + c*e_l."""
        if c == 0:
            return
        self.a.zip_row_op(k, l, lambda v, u: v + c * u)
        add_column(self.a, k, l, c)
        add_column(self.p, k, l, c)


def frobenius_reduction(gram) -> Tuple[Matrix, List[int]]:
    """
    Reduce an integral nondegenerate skew form to Frobenius normal form.

    Repeatedly selects the minimal nonzero pairing (ties broken by the
    lexicographically smallest index pair), clears its rows and columns by
    integer operations and recurses on the complement.

    Args:
        gram: 2n x 2n skew-symmetric integer matrix

    Returns:
        (P, t) with P unimodular and P^T*gram*P = [[0, diag(t)], [-diag(t), 0]],
        t_1 | t_2 | ... | t_n positive

    Raises:
        NotIntegral, DegenerateLattice, DimensionError
    """
    g = as_integer_matrix(gram, "Gram matrix")
    size = g.shape[0]
    if g.shape[0] != g.shape[1] or size % 2:
        raise DimensionError(f"Gram matrix must be square of even size, got {g.shape}")
    if g.T != -g:
        raise DimensionError("Gram matrix is not skew-symmetric")
    if g.det() == 0:
        raise DegenerateLattice("Gram matrix is singular")

    red = _SkewReducer(g)
    divisors: List[int] = []
    for s in range(size // 2):
        p = 2 * s
        while True:
            a = red.a
            best = None
            for i in range(p, size):
                for j in range(i + 1, size):
                    if a[i, j] != 0 and (best is None or abs(a[i, j]) < best[0]):
                        best = (abs(a[i, j]), i, j)
            _, i, j = best
            red.swap(i, p)
            if j == p:
                j = i
            red.swap(j, p + 1)
            if red.a[p, p + 1] < 0:
                red.negate(p + 1)
            d = red.a[p, p + 1]

            clean = True
            for k in range(p + 2, size):
                red.add(k, p + 1, -(red.a[p, k] // d))
                red.add(k, p, red.a[p + 1, k] // d)
                if red.a[p, k] != 0 or red.a[p + 1, k] != 0:
                    clean = False
            if not clean:
                continue

            offender = None
            for i in range(p + 2, size):
                for j in range(i + 1, size):
                    if red.a[i, j] % d != 0:
                        offender = i
                        break
                if offender is not None:
                    break
            if offender is None:
                break
            logger.debug(f"pivot {d} does not divide complement; folding e_{offender} into e_{p}")
            red.add(p, offender, 1)
        divisors.append(int(red.a[p, p + 1]))

    order = list(range(0, size, 2)) + list(range(1, size, 2))
    frame = red.p.extract(list(range(size)), order)
    return frame, divisors


def frobenius_matrix(divisors: List[int]) -> Matrix:
    """[[0, D], [-D, 0]] for D = diag(divisors)."""
    n = len(divisors)
    out = zeros(2 * n, 2 * n)
    for i, t in enumerate(divisors):
        out[i, n + i] = t
        out[n + i, i] = -t
    return out
