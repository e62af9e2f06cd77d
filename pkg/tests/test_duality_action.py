"""Tests for duality transformations and the covariance of the residuals."""

from dataclasses import replace

import numpy as np
import pytest
from sympy import ImmutableMatrix, Rational, eye

from algebra.symplectic_core import IntegralLattice
from core.builders import ScenarioBuilder, load_bundled
from geometry.spacetime_fields import ScalarMapField
from theory.duality_action import (
    DualityTransformation,
    apply_duality,
    check_equivariance,
    compose,
    covariance_check,
    deck_equivalent,
    exact_sequence_check,
    is_integral_duality,
    is_symmetry,
    random_transformations,
    reflection_lifts,
    validate_transformation,
)
from tests.conftest import J0, PARABOLIC
from utils.errors import DimensionError, EquivarianceViolation, IsometryViolation


@pytest.fixture(scope="module")
def ufold():
    return ScenarioBuilder(load_bundled("ufold"))


@pytest.fixture(scope="module")
def vacuum():
    return ScenarioBuilder(load_bundled("vacuum"))


class TestTransformations:
    def test_ufold_transformations_are_valid(self, ufold):
        assert len(ufold.transformations) == 3
        for f in ufold.transformations:
            report = validate_transformation(f, ufold.target, ufold.taming, 1e-10)
            assert report["metric"] == 0.0
            assert report["potential"] == 0.0

    def test_lift_must_intertwine(self, ufold):
        f = DualityTransformation.build(ufold.target, ImmutableMatrix([[0, -1], [1, 0]]))
        with pytest.raises(EquivarianceViolation):
            validate_transformation(f, ufold.target, ufold.taming, 1e-10)

    def test_periods_must_map_to_periods(self, ufold):
        with pytest.raises(IsometryViolation):
            DualityTransformation.build(ufold.target, PARABOLIC, a=[[2.0]])

    def test_potential_must_be_invariant(self, vacuum):
        shift = DualityTransformation.build(vacuum.target, np.eye(2), tau=[0.5])
        with pytest.raises(IsometryViolation):
            validate_transformation(shift, vacuum.target, vacuum.taming, 1e-10)
        reflection = DualityTransformation.build(vacuum.target, np.eye(2), a=[[-1.0]])
        assert validate_transformation(reflection, vacuum.target, vacuum.taming, 1e-10)["potential"] == 0.0

    def test_compose(self, ufold):
        shift, parabolic, minus = ufold.transformations
        composite = compose(parabolic, shift)
        assert composite.is_exact
        assert composite.lift == PARABOLIC
        np.testing.assert_allclose(composite.tau, [0.25])
        assert composite.generator_map == ((0, 1),)
        assert compose(minus, minus).lift == ImmutableMatrix([[1, 0], [0, 1]])


class TestCovariance:
    def test_scenario_transformations(self, ufold):
        cfg = ufold.configuration
        for f in ufold.transformations:
            report = covariance_check(f, cfg)
            assert report.passed, report.to_dict()
            assert report.max_discrepancy <= cfg.params.tol("covariance_tol")

    def test_random_transformations(self, ufold, rng):
        cfg = ufold.configuration
        sample = random_transformations(ufold.target, rng, 5)
        assert len(sample) == 5
        for f in sample:
            assert 0.0 <= f.tau[0] < 1.0
            assert covariance_check(f, cfg).passed

    def test_parabolic_monodromy_has_no_reflection_coset(self, ufold, rng):
        assert reflection_lifts(ufold.target) == []
        for f in random_transformations(ufold.target, rng, 6):
            assert f.a[0, 0] == 1.0

    def test_random_reflections_on_symmetric_target(self, vacuum, rng):
        cfg = vacuum.configuration
        sample = random_transformations(vacuum.target, rng, 12)
        reflections = [f for f in sample if f.a[0, 0] == -1.0]
        assert reflections
        for f in sample:
            assert validate_transformation(f, vacuum.target, vacuum.taming, 1e-10)["potential"] == 0.0
            assert covariance_check(f, cfg).passed

    def test_reflection_lifts_invert_the_monodromy(self, ufold_target):
        flip = ufold_target.monodromy.with_images([-eye(2)])
        target = replace(ufold_target, monodromy=flip)
        lifts = reflection_lifts(target)
        assert lifts
        sample = random_transformations(target, np.random.default_rng(3), 12)
        assert any(f.a[0, 0] == -1.0 for f in sample)
        for f in sample:
            assert f.generator_map == ((0, int(f.a[0, 0])),)
            assert check_equivariance(f, flip) == 0.0

    def test_random_sample_is_seeded(self, ufold):
        first = random_transformations(ufold.target, np.random.default_rng(7), 4)
        second = random_transformations(ufold.target, np.random.default_rng(7), 4)
        assert [f.describe() for f in first] == [f.describe() for f in second]

    def test_apply_duality_moves_the_fields(self, ufold):
        cfg = ufold.configuration
        minus = ufold.transformations[2]
        moved = apply_duality(minus, cfg)
        np.testing.assert_allclose(moved.v.v, -cfg.v.v)
        np.testing.assert_allclose(moved.phi.phi, cfg.phi.phi)
        shift = ufold.transformations[0]
        np.testing.assert_allclose(apply_duality(shift, cfg).phi.phi, cfg.phi.phi + 0.25)

    def test_report_layout(self, ufold):
        data = covariance_check(ufold.transformations[1], ufold.configuration).to_dict()
        assert set(data["discrepancy"]) == {"scalar", "em", "polarization"}
        assert "einstein_discrepancy" in data


class TestSymmetries:
    def test_ufold_symmetries(self, ufold):
        _, parabolic, minus = ufold.transformations
        assert is_symmetry(minus, ufold.taming)
        assert not is_symmetry(parabolic, ufold.taming)

    def test_constant_taming_symmetries(self, trivial_target, constant_taming):
        rotation = DualityTransformation.build(trivial_target, J0)
        squeeze = DualityTransformation.build(trivial_target, ImmutableMatrix([[2, 0], [0, Rational(1, 2)]]))
        assert is_symmetry(rotation, constant_taming)
        assert not is_symmetry(squeeze, constant_taming)

    def test_integral_dualities(self, ufold, sp2):
        lattice = IntegralLattice.standard(sp2)
        _, parabolic, minus = ufold.transformations
        assert is_integral_duality(parabolic, lattice, sp2)
        assert is_integral_duality(minus, lattice)
        squeeze = DualityTransformation.build(ufold.target, ImmutableMatrix([[2, 0], [0, Rational(1, 2)]]))
        assert not is_integral_duality(squeeze, lattice, sp2)
        with pytest.raises(DimensionError):
            is_integral_duality(DualityTransformation.build(ufold.target, J0), lattice, sp2)


class TestExactSequence:
    def test_exact_sequence_on_ufold(self, ufold):
        report = exact_sequence_check(ufold.target, ufold.transformations, ufold.taming)
        assert report["ok"], report["violations"]
        assert report["commutant_dimension"] == 2
        assert len(report["projection"]) == 9
        symmetric = [entry for entry in report["kernel"] if entry.get("symmetry")]
        assert symmetric and all(entry["duality"] for entry in symmetric)

    def test_exact_sequence_accepts_trivial_monodromy(self, trivial_target):
        report = exact_sequence_check(trivial_target, [DualityTransformation.identity(trivial_target)])
        assert report["ok"]
        assert report["commutant_dimension"] == 4


def test_deck_transformation(ufold):
    cfg = ufold.configuration
    shifted = cfg.with_fields(
        phi=ScalarMapField(cfg.phi.phi + 1.0, cfg.phi.shifts, cfg.grid),
        v=cfg.v.with_values(np.einsum("ab,...bmn->...amn", np.array([[1.0, 1.0], [0.0, 1.0]]), cfg.v.v)),
    )
    verdict = deck_equivalent(cfg, shifted)
    assert verdict["equivalent"]
    assert verdict["word"] == "a"
    assert not deck_equivalent(cfg, cfg.with_fields(v=cfg.v.scaled(2.0)))["equivalent"]
