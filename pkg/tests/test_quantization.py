"""Tests for twisted cohomology and the Dirac quantization check."""

import copy

import numpy as np
import pytest
from sympy import ImmutableMatrix, eye

from algebra.local_system import GroupPresentation, MonodromyRep, Word
from algebra.symplectic_core import IntegralLattice
from core.builders import ScenarioBuilder, load_bundled
from core.scenario import Scenario
from geometry.fields import ConstantField
from geometry.spacetime_fields import SpacetimeGrid, TwistedTwoForm, transitions_for
from geometry.target_geometry import ScalarTarget
from theory.quantization import (
    QuantizationKind,
    circle_complex,
    euler_characteristic,
    grid_complex,
    integrate_cochain,
    quantization_check,
    torus_complex,
    torus_transport,
    twisted_cohomology,
)
from tests.conftest import J0, PARABOLIC
from utils.errors import ComplexMismatch, InvalidComplex, LatticeNotPreserved

MINUS = ImmutableMatrix([[-1, 0], [0, -1]])


def ranks(complex_, ring="real"):
    return tuple(twisted_cohomology(complex_, k, ring).rank for k in range(complex_.top + 1))


@pytest.fixture
def circle_target(sp2):
    """Unit circle target whose monodromy flips the fiber."""
    rep = MonodromyRep.build(GroupPresentation.free_abelian(1), sp2, [MINUS], IntegralLattice.standard(sp2))
    return ScalarTarget(1, (1.0,), ConstantField(1, np.eye(1)), ConstantField(1, 0.0), rep)


class TestCohomology:
    def test_trivial_two_torus(self, sp2):
        rep = MonodromyRep.build(GroupPresentation.free_abelian(2), sp2, [eye(2), eye(2)], IntegralLattice.standard(sp2))
        complex_ = torus_complex(rep)
        assert [complex_.count(k) for k in range(3)] == [1, 2, 1]
        assert ranks(complex_) == (2, 4, 2)
        assert ranks(complex_, "integer") == (2, 4, 2)
        assert all(not twisted_cohomology(complex_, k, "integer").torsion for k in range(3))

    def test_flipped_circle(self, sp2):
        rep = MonodromyRep.build(GroupPresentation.free_abelian(1), sp2, [MINUS], IntegralLattice.standard(sp2))
        complex_ = circle_complex(rep)
        assert ranks(complex_) == (0, 0)
        h1 = twisted_cohomology(complex_, 1, "integer")
        assert h1.rank == 0
        assert h1.torsion == (2, 2)
        assert h1.to_dict() == {"degree": 1, "ring": "integer", "rank": 0, "torsion": [2, 2]}

    def test_parabolic_circle(self, sp2):
        rep = MonodromyRep.build(GroupPresentation.free_abelian(1), sp2, [PARABOLIC], IntegralLattice.standard(sp2))
        complex_ = circle_complex(rep)
        assert ranks(complex_) == (1, 1)
        h1 = twisted_cohomology(complex_, 1, "integer")
        assert (h1.rank, h1.torsion) == (1, ())

    def test_euler_characteristic_matches_ranks(self, sp2):
        rep = MonodromyRep.build(GroupPresentation.free_abelian(1), sp2, [PARABOLIC])
        complex_ = circle_complex(rep)
        alternating = sum((-1) ** k * r for k, r in enumerate(ranks(complex_)))
        assert alternating == euler_characteristic(complex_) * complex_.rank == 0

    def test_grid_complex_cells(self, flat_grid, trivial_target):
        complex_ = grid_complex(flat_grid, trivial_target)
        assert complex_.axes == (1, 2, 3)
        assert [complex_.count(k) for k in range(4)] == [1, 3, 3, 1]
        assert complex_.cells[2] == ("xy", "xz", "yz")
        assert euler_characteristic(complex_) == 0

    def test_bad_requests(self, sp2):
        rep = MonodromyRep.build(GroupPresentation.free_abelian(1), sp2, [PARABOLIC])
        complex_ = circle_complex(rep)
        with pytest.raises(InvalidComplex):
            twisted_cohomology(complex_, 3)
        with pytest.raises(InvalidComplex):
            twisted_cohomology(complex_, 0, "complex")
        with pytest.raises(LatticeNotPreserved):
            twisted_cohomology(complex_, 0, "integer")
        with pytest.raises(InvalidComplex):
            circle_complex(MonodromyRep.trivial(GroupPresentation.free_abelian(2), sp2))


class TestQuantization:
    def test_half_period_flux(self):
        builder = ScenarioBuilder(load_bundled("half_period"))
        complex_ = grid_complex(builder.grid, builder.target)
        verdict = quantization_check(builder.two_form, complex_)
        assert verdict.kind == QuantizationKind.NON_INTEGRAL
        assert verdict.residual == pytest.approx(0.5)
        np.testing.assert_allclose(verdict.cochain.values, [[0.5, 0.0]])
        assert not verdict.passed

    def test_unit_flux_is_integral(self):
        data = copy.deepcopy(load_bundled("half_period").data)
        data["V"]["scale"] = 1
        builder = ScenarioBuilder(Scenario.from_dict(data))
        verdict = quantization_check(builder.two_form, grid_complex(builder.grid, builder.target))
        assert verdict.passed
        assert sorted(abs(c) for c in verdict.coefficients) == [0, 1]
        assert verdict.residual < 1e-12

    def test_ufold_cochain_vanishes(self):
        builder = ScenarioBuilder(load_bundled("ufold"))
        verdict = quantization_check(builder.two_form, grid_complex(builder.grid, builder.target))
        assert verdict.passed
        assert np.max(np.abs(verdict.cochain.values)) < 1e-10
        assert verdict.to_dict()["verdict"] == "Integral"

    def test_twisted_flux_is_not_closed(self, circle_target):
        grid = SpacetimeGrid((8, 8, 8, 8), (0.125,) * 4, (False, True, True, True),
                             phi_winding=(None, Word.generator(0), None, None))
        x = grid.coordinates()[..., 1]
        v = np.zeros(tuple(grid.shape) + (2, 4, 4))
        v[..., 0, 2, 3] = np.cos(np.pi * x)
        v[..., 0, 3, 2] = -v[..., 0, 2, 3]
        form = TwistedTwoForm.build(grid, transitions_for(grid, circle_target), v)
        verdict = quantization_check(form, grid_complex(grid, circle_target))
        assert verdict.kind == QuantizationKind.NOT_CLOSED
        assert verdict.closedness == pytest.approx(2.0)

    def test_mismatched_complex(self, flat_grid, trivial_target):
        other = SpacetimeGrid((8, 8, 8, 8), (0.125,) * 4, (False, True, True, False))
        form = TwistedTwoForm.zeros(flat_grid, transitions_for(flat_grid, trivial_target), 2)
        with pytest.raises(ComplexMismatch):
            integrate_cochain(form, grid_complex(other, trivial_target))


class TestTorusFibers:
    def test_parabolic_transport(self, ufold_target):
        rep = ufold_target.monodromy
        moved = torus_transport(rep, rep.lattice, J0, Word.generator(0))
        assert moved["word"] == "a"
        assert moved["lattice_preserved"] and moved["omega_preserved"]
        assert not moved["complex_structure_preserved"]

    def test_flip_preserves_everything(self, circle_target):
        rep = circle_target.monodromy
        moved = torus_transport(rep, rep.lattice, J0, Word.generator(0, 3))
        assert moved["complex_structure_preserved"]
        assert moved["lattice_preserved"]
