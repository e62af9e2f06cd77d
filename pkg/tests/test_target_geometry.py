"""Tests for the scalar target, taming fields and the fundamental form."""

import numpy as np
import pytest

from geometry.fields import ConstantField, ExpressionField
from geometry.target_geometry import (
    ScalarTarget,
    TamingField,
    TargetGrid,
    check_twisted_periodicity,
    fundamental_field,
    fundamental_form,
    is_unitary,
)
from tests.conftest import J0
from utils.errors import DimensionError, GridTooCoarse, NonGlobalSection, NotAlmostComplex, SingularMetric


def ufold_j(y):
    """J(y) = E(y) J0 E(y)^-1 for E(y) = [[1, y], [0, 1]]."""
    return np.array([[y, -y * y - 1.0], [1.0, -y]])


def ufold_theta(y):
    return np.array([[1.0, -2.0 * y], [0.0, -1.0]])


class TestScalarTarget:
    def test_period_bookkeeping(self, ufold_target):
        assert ufold_target.periodic_axes == [0]
        assert ufold_target.generator_of_axis(0) == 0
        word = ufold_target.monodromy.presentation.word("a^2")
        np.testing.assert_allclose(ufold_target.period_vector(word), [2.0])

    def test_shape_checks(self, ufold_target):
        with pytest.raises(DimensionError):
            ScalarTarget(1, (1.0, None), ufold_target.metric, ufold_target.potential, ufold_target.monodromy)
        with pytest.raises(DimensionError):
            ScalarTarget(1, (None,), ufold_target.metric, ufold_target.potential, ufold_target.monodromy)

    def test_numerical_gradient(self, trivial_target):
        target = ScalarTarget(1, (None,), trivial_target.metric, ExpressionField(1, "y0**3/3"),
                              trivial_target.monodromy)
        grad = target.gradient_at(np.array([[0.5], [-1.5]]))
        np.testing.assert_allclose(grad[:, 0], [0.25, 2.25], rtol=1e-8)

    def test_christoffel_symbol(self, trivial_target):
        target = ScalarTarget(1, (None,), ExpressionField(1, [["1 + y0**2"]]), trivial_target.potential,
                              trivial_target.monodromy)
        gamma = target.christoffel_at(np.array([0.5]))
        assert gamma[0, 0, 0] == pytest.approx(0.4, rel=1e-6)

    def test_metric_checks(self, trivial_target):
        bad = ScalarTarget(1, (None,), ConstantField(1, [[-1.0]]), trivial_target.potential,
                           trivial_target.monodromy)
        with pytest.raises(SingularMetric):
            bad.check_metric(np.zeros((3, 1)))
        singular = ScalarTarget(1, (None,), ConstantField(1, [[0.0]]), trivial_target.potential,
                                trivial_target.monodromy)
        with pytest.raises(SingularMetric):
            singular.metric_inverse_at(np.zeros((2, 1)))


class TestTargetGrid:
    def test_periodic_axes_skip_closing_point(self, ufold_target):
        grid = TargetGrid.for_target(ufold_target, [8])
        assert grid.spacing == (0.125,)
        np.testing.assert_allclose(grid.axes()[0], np.arange(8) / 8)

    def test_bounded_axes_include_end_points(self, trivial_target):
        grid = TargetGrid.for_target(trivial_target, [5], [(-1.0, 1.0)])
        assert grid.spacing == (0.5,)
        assert grid.points().shape == (5, 1)


class TestTamingField:
    def test_ufold_taming_is_valid(self, ufold_taming):
        assert ufold_taming.validate(1e-10) == 8
        report = check_twisted_periodicity(ufold_taming.target, ufold_taming, 1e-10)
        assert report["ok"]
        assert report["violation"] <= 1e-10

    def test_constant_taming_is_not_a_global_section(self, ufold_target):
        taming = TamingField(ConstantField(1, J0), TargetGrid.for_target(ufold_target, [8]), ufold_target)
        report = check_twisted_periodicity(ufold_target, taming, 1e-8)
        assert not report["ok"]
        assert report["per_generator"]["a"] > 0.5
        with pytest.raises(NonGlobalSection):
            check_twisted_periodicity(ufold_target, taming, 1e-8, strict=True)

    def test_identity_is_not_a_taming(self, trivial_target):
        taming = TamingField(ConstantField(1, np.eye(2)), TargetGrid.for_target(trivial_target, [3]),
                             trivial_target)
        with pytest.raises(NotAlmostComplex):
            taming.validate()

    def test_extension_beyond_fundamental_domain(self, ufold_taming):
        ys = np.array([[-0.75], [0.3], [1.3], [2.6]])
        values = ufold_taming.at(ys)
        for y, value in zip(ys[:, 0], values):
            np.testing.assert_allclose(value, ufold_j(y), atol=1e-10)


class TestFundamentalForm:
    def test_constant_taming_is_unitary(self, trivial_target, constant_taming):
        ff = fundamental_form(trivial_target, constant_taming)
        assert is_unitary(ff, 1e-12)
        assert ff.theta.shape == (5, 1, 2, 2)

    def test_ufold_fundamental_form(self, ufold_target, ufold_taming):
        ff = fundamental_form(ufold_target, ufold_taming)
        assert not is_unitary(ff, 1e-6)
        for k, y in enumerate(ufold_taming.sample_grid.axes()[0]):
            np.testing.assert_allclose(ff.theta[k, 0], ufold_theta(y), atol=1e-10)
        np.testing.assert_allclose(ff.at(np.array([1.7]))[0], ufold_theta(1.7), atol=1e-6)

    def test_fundamental_field_raises_index(self, ufold_target, ufold_taming):
        psi = fundamental_field(ufold_target, fundamental_form(ufold_target, ufold_taming))
        np.testing.assert_allclose(psi.psi, psi.form.theta)
        np.testing.assert_allclose(psi.at(np.array([0.2]))[0], ufold_theta(0.2), atol=1e-6)

    def test_coarse_grid(self, ufold_target):
        taming = TamingField(ConstantField(1, J0), TargetGrid.for_target(ufold_target, [2]), ufold_target)
        with pytest.raises(GridTooCoarse):
            fundamental_form(ufold_target, taming)
