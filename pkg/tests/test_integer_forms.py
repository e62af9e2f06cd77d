"""Tests for exact integer normal forms."""

import numpy as np
import pytest
from sympy import Matrix, Rational, eye, zeros

from algebra.integer_forms import (
    frobenius_matrix,
    frobenius_reduction,
    integer_kernel,
    is_unimodular,
    row_hermite_normal_form,
    same_lattice,
    smith_divisors,
    smith_normal_form,
)
from utils.errors import DegenerateLattice, DimensionError, NotIntegral


def random_unimodular(rng, size, steps=12):
    """Product of random elementary integer operations."""
    m = eye(size)
    for _ in range(steps):
        i, j = (int(k) for k in rng.choice(size, 2, replace=False))
        c = int(rng.integers(-3, 4))
        m = m.copy()
        m[i, :] = m[i, :] + c * m[j, :]
        if rng.random() < 0.2:
            m.row_swap(i, j)
    return m


class TestSmithNormalForm:
    def test_transforms_reproduce_diagonal(self):
        a = Matrix([[2, 4, 4], [-6, 6, 12], [10, -4, -16]])
        d, u, w = smith_normal_form(a)
        assert u * a * w == d
        assert is_unimodular(u) and is_unimodular(w)
        assert [d[i, i] for i in range(3)] == [2, 6, 12]

    def test_divisibility_chain_on_random_matrices(self, rng):
        for _ in range(20):
            a = Matrix(rng.integers(-9, 10, size=(3, 4)).tolist())
            divisors = smith_divisors(a)
            assert len(divisors) == a.rank()
            for x, y in zip(divisors, divisors[1:]):
                assert y % x == 0

    def test_needs_column_operations(self):
        a = Matrix([[2, 3], [4, 5]])
        d, u, w = smith_normal_form(a)
        assert d == Matrix([[1, 0], [0, 2]])
        assert u * a * w == d
        assert is_unimodular(w) and w != eye(2)

    def test_zero_matrix(self):
        d, u, w = smith_normal_form(zeros(2, 3))
        assert d == zeros(2, 3)
        assert smith_divisors(zeros(2, 3)) == []

    def test_rejects_fractions(self):
        with pytest.raises(NotIntegral):
            smith_normal_form(Matrix([[1, 0], [0, Rational(1, 2)]]))


class TestKernelsAndHermite:
    def test_integer_kernel_annihilates(self):
        a = Matrix([[1, 2, 3], [2, 4, 6]])
        k = integer_kernel(a)
        assert k.shape == (3, 2)
        assert a * k == zeros(2, 2)

    def test_hermite_form_is_basis_invariant(self, rng):
        basis = Matrix([[2, 1, 0], [0, 3, 1], [1, 0, 4]])
        for _ in range(10):
            changed = basis * random_unimodular(rng, 3)
            assert same_lattice(basis, changed)
            assert row_hermite_normal_form(changed.T) == row_hermite_normal_form(basis.T)

    def test_sublattice_differs(self):
        assert not same_lattice(eye(2), Matrix([[2, 0], [0, 1]]))


class TestFrobeniusReduction:
    @pytest.mark.parametrize("divisors", [[1], [3], [1, 1], [1, 2], [2, 6], [1, 2, 6], [1, 1, 5]])
    def test_reproduces_normal_form_input(self, divisors):
        p, found = frobenius_reduction(frobenius_matrix(divisors))
        assert found == divisors
        assert is_unimodular(p)

    def test_invariant_under_basis_change(self, rng):
        for trial in range(100):
            n = 1 + trial % 3
            divisors = [1, 2, 6][:n]
            gram = frobenius_matrix(divisors)
            u = random_unimodular(rng, 2 * n)
            changed = u.T * gram * u
            p, found = frobenius_reduction(changed)
            assert found == divisors
            assert p.T * changed * p == gram

    def test_type_one_six_from_a_skewed_basis(self):
        u = Matrix([[1, 2, 0, 1], [0, 1, 3, 0], [0, 0, 1, 2], [0, 0, 0, 1]]) * \
            Matrix([[1, 0, 0, 0], [0, 1, 0, 0], [1, 0, 1, 0], [0, -1, 0, 1]])
        assert is_unimodular(u)
        gram = u.T * frobenius_matrix([1, 6]) * u
        p, found = frobenius_reduction(gram)
        assert found == [1, 6]
        assert is_unimodular(p)
        assert p.T * gram * p == frobenius_matrix([1, 6])

    def test_rejects_degenerate_and_odd(self):
        with pytest.raises(DegenerateLattice):
            frobenius_reduction(zeros(2, 2))
        with pytest.raises(DimensionError):
            frobenius_reduction(zeros(3, 3))
        with pytest.raises(DimensionError):
            frobenius_reduction(Matrix([[0, 1], [1, 0]]))


def test_unimodular_detection():
    assert is_unimodular(Matrix([[2, 1], [1, 1]]))
    assert not is_unimodular(Matrix([[2, 0], [0, 1]]))
    assert not is_unimodular(Matrix([[1, 0, 0], [0, 1, 0]]))
    assert is_unimodular(np.eye(3, dtype=int))
