"""Tests for spacetime grids, the twisted Hodge operator and the twisted differential."""

import numpy as np
import pytest

from algebra.local_system import GroupPresentation, MonodromyRep, Word
from algebra.symplectic_core import SymplecticSpace, standard_complex_structure, to_float
from geometry.fields import ConstantField
from geometry.finite_differences import derivative
from geometry.spacetime_fields import (
    HodgeContext,
    LorentzMetricField,
    ScalarMapField,
    SpacetimeGrid,
    TwistedTwoForm,
    hodge_star,
    inner_contraction,
    polarization_rank,
    polarization_violation,
    polarize,
    twisted_d,
    twisted_hodge,
)
from geometry.target_geometry import TamingField, TargetGrid, constant_target
from utils.errors import CutCompatibilityError, DimensionError, GridTooCoarse, SignatureError, SingularMetric

SMALL = SpacetimeGrid((3, 3, 3, 3), (0.5,) * 4, (False, True, True, True))


def random_metric(rng, grid):
    """Minkowski plus a small symmetric perturbation at every node."""
    eta = np.diag([-1.0, 1.0, 1.0, 1.0])
    noise = 0.1 * rng.standard_normal(tuple(grid.shape) + (4, 4))
    return LorentzMetricField.build(grid, eta + 0.5 * (noise + np.swapaxes(noise, -1, -2)))


def random_taming(rng, n):
    """S J0 S^-1 for a random symplectic S = [[A, 0], [0, A^-T]] [[I, B], [0, I]]."""
    a = np.eye(n) + 0.3 * rng.standard_normal((n, n))
    b = rng.standard_normal((n, n))
    s = np.block([[a, np.zeros((n, n))], [np.zeros((n, n)), np.linalg.inv(a).T]])
    s = s @ np.block([[np.eye(n), b + b.T], [np.zeros((n, n)), np.eye(n)]])
    return s @ to_float(standard_complex_structure(n)) @ np.linalg.inv(s)


def random_two_form(rng, grid, rank):
    v = rng.standard_normal(tuple(grid.shape) + (rank, 4, 4))
    return v - np.swapaxes(v, -1, -2)


def hodge_context(grid, metric, j):
    n = j.shape[0] // 2
    sp = SymplecticSpace.standard(n)
    target = constant_target(1, sp, MonodromyRep.trivial(GroupPresentation.free(0), sp))
    taming = TamingField(ConstantField(1, j), TargetGrid.for_target(target, [3]), target)
    phi = ScalarMapField.build(grid, target, np.zeros(tuple(grid.shape) + (1,)))
    return HodgeContext.build(metric, taming, phi)


class TestGrid:
    def test_refine(self):
        fine = SpacetimeGrid((8, 8, 8, 8), (0.25,) * 4, (False, True, True, True)).refine(2)
        assert fine.shape == (15, 16, 16, 16)
        assert fine.spacing == (0.125,) * 4
        assert fine.periods == (None, 2.0, 2.0, 2.0)

    def test_rejections(self):
        with pytest.raises(GridTooCoarse):
            SpacetimeGrid((2, 8, 8, 8), (0.1,) * 4, (False, True, True, True))
        with pytest.raises(DimensionError):
            SpacetimeGrid((8, 8, 8, 8), (0.1,) * 4, (False,) * 4,
                          phi_winding=(Word.generator(0), None, None, None))

    def test_metric_rejections(self):
        euclidean = np.broadcast_to(np.eye(4), (3, 3, 3, 3, 4, 4)).copy()
        with pytest.raises(SignatureError):
            LorentzMetricField.build(SMALL, euclidean)
        with pytest.raises(SingularMetric):
            LorentzMetricField.build(SMALL, np.zeros((3, 3, 3, 3, 4, 4)))


class TestScalarMap:
    def test_winding_map_derivative(self, ufold_target):
        grid = SpacetimeGrid((4, 8, 4, 4), (0.125,) * 4, (False, True, True, True),
                             phi_winding=(None, Word.generator(0), None, None))
        phi = ScalarMapField.from_function(grid, ufold_target, lambda x: x[..., 1:2])
        d = phi.derivatives()
        np.testing.assert_allclose(d[..., 1, 0], 1.0, atol=1e-12)
        np.testing.assert_allclose(d[..., 0, 0], 0.0, atol=1e-12)

    def test_inconsistent_winding(self, ufold_target):
        grid = SpacetimeGrid((4, 8, 4, 4), (0.125,) * 4, (False, True, True, True),
                             phi_winding=(None, Word.generator(0), None, None))
        with pytest.raises(CutCompatibilityError):
            ScalarMapField.from_function(grid, ufold_target, lambda x: 2.0 * x[..., 1:2])


class TestTwistedHodge:
    def test_untwisted_star_squares_to_minus_one(self, rng):
        metric = random_metric(rng, SMALL)
        f = random_two_form(rng, SMALL, 2)
        np.testing.assert_allclose(hodge_star(metric, hodge_star(metric, f)), -f, atol=1e-10)

    @pytest.mark.parametrize("n", [1, 2])
    def test_involution(self, rng, n):
        for _ in range(5):
            ctx = hodge_context(SMALL, random_metric(rng, SMALL), random_taming(rng, n))
            v = TwistedTwoForm.build(SMALL, (None,) * 4, random_two_form(rng, SMALL, 2 * n))
            twice = twisted_hodge(ctx, twisted_hodge(ctx, v))
            np.testing.assert_allclose(twice.v, v.v, atol=1e-9)

    @pytest.mark.parametrize("n", [1, 2])
    def test_projector(self, rng, n):
        ctx = hodge_context(SMALL, random_metric(rng, SMALL), random_taming(rng, n))
        v = TwistedTwoForm.build(SMALL, (None,) * 4, random_two_form(rng, SMALL, 2 * n))
        once = polarize(v, ctx)
        np.testing.assert_allclose(polarize(once, ctx).v, once.v, atol=1e-9)
        assert np.max(polarization_violation(once, ctx)) < 1e-9
        assert np.max(polarization_violation(v, ctx)) > 1e-3
        assert polarization_rank(ctx, (1, 1, 1, 1), 2 * n) == 6 * n

    def test_q_is_positive(self, rng):
        ctx = hodge_context(SMALL, random_metric(rng, SMALL), random_taming(rng, 2))
        assert np.min(np.linalg.eigvalsh(ctx.q)) > 0

    def test_contraction_shape_check(self, rng):
        metric = LorentzMetricField.minkowski(SMALL)
        v1 = TwistedTwoForm.build(SMALL, (None,) * 4, random_two_form(rng, SMALL, 2))
        v2 = TwistedTwoForm.build(SMALL, (None,) * 4, random_two_form(rng, SMALL, 4))
        with pytest.raises(DimensionError):
            inner_contraction(v1, v2, metric, np.eye(2))


class TestTwistedDifferential:
    def test_exact_forms_are_closed(self, rng):
        grid = SpacetimeGrid((4, 4, 4, 4), (0.25,) * 4, (True,) * 4)
        a = rng.standard_normal((4, 4, 4, 4, 2, 4))
        da = np.stack([derivative(a, ax, 0.25, True) for ax in range(4)], axis=-2)
        v = TwistedTwoForm.build(grid, (None,) * 4, da - np.swapaxes(da, -1, -2))
        assert np.max(np.abs(twisted_d(v))) < 1e-10

    def test_derivative_across_twisted_cut(self):
        grid = SpacetimeGrid((3, 8, 4, 4), (0.125,) * 4, (False, True, True, True))
        flip = -np.eye(2)

        def field(x):
            v = np.zeros(x.shape[:-1] + (2, 4, 4))
            v[..., 0, 0, 2] = np.sin(np.pi * x[..., 1])
            v[..., 0, 2, 0] = -v[..., 0, 0, 2]
            return v

        v = TwistedTwoForm.from_function(grid, (None, flip, None, None), field)
        dv = twisted_d(v)
        x = grid.coordinates()[..., 1]
        h = 0.125
        np.testing.assert_allclose(dv[..., 0, 1, 0, 2], np.cos(np.pi * x) * np.sin(np.pi * h) / h, atol=1e-12)

    def test_incompatible_two_form(self):
        grid = SpacetimeGrid((3, 8, 4, 4), (0.125,) * 4, (False, True, True, True))

        def field(x):
            v = np.zeros(x.shape[:-1] + (2, 4, 4))
            v[..., 0, 0, 2] = np.sin(np.pi * x[..., 1])
            v[..., 0, 2, 0] = -v[..., 0, 0, 2]
            return v

        with pytest.raises(CutCompatibilityError):
            TwistedTwoForm.from_function(grid, (None,) * 4, field)
