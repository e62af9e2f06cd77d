"""Tests for the discretized Einstein, scalar and electromagnetic residuals."""

import numpy as np
import pytest
import sympy as sp

from algebra.symplectic_core import EsmParameters
from geometry.fields import ExpressionField
from geometry.spacetime_fields import (
    LorentzMetricField,
    ScalarMapField,
    SpacetimeGrid,
    TwistedTwoForm,
    transitions_for,
)
from geometry.target_geometry import ScalarTarget
from theory.esm_residuals import (
    EsmConfiguration,
    ResidualReport,
    convergence_order,
    einstein_tensor,
    modified_tension,
    psi_at_nodes,
    relabel_axes,
    residual_report,
    scalar_residual,
)
from utils.errors import DimensionError, PolarizationError

TWO_PI = 2.0 * np.pi


def configuration(grid, target, taming, phi=None, v=None, metric=None, **params):
    phi_values = np.zeros(tuple(grid.shape) + (target.dim,)) if phi is None else phi
    transitions = transitions_for(grid, target)
    form = TwistedTwoForm.zeros(grid, transitions, target.sp.dim) if v is None else \
        TwistedTwoForm.build(grid, transitions, v)
    return EsmConfiguration(
        grid,
        LorentzMetricField.minkowski(grid) if metric is None else metric,
        ScalarMapField.build(grid, target, phi_values),
        form,
        target,
        taming,
        EsmParameters(**params),
    )


def plane_wave(grid):
    """cos(k.x) (k ^ dy) e1 with null wavevector k = 2 pi (-1, 1, 0, 0)."""
    x = grid.coordinates()
    c = np.cos(TWO_PI * (x[..., 1] - x[..., 0]))
    v = np.zeros(tuple(grid.shape) + (2, 4, 4))
    v[..., 0, 0, 2] = -TWO_PI * c
    v[..., 0, 1, 2] = TWO_PI * c
    return v - np.swapaxes(v, -1, -2)


def isotropic_schwarzschild(coords, mass=1.0):
    """Schwarzschild metric in isotropic coordinates, a static vacuum solution."""
    r = np.linalg.norm(coords[..., 1:], axis=-1)
    a = mass / (2.0 * r)
    g = np.zeros(coords.shape[:-1] + (4, 4))
    g[..., 0, 0] = -((1.0 - a) / (1.0 + a)) ** 2
    for i in (1, 2, 3):
        g[..., i, i] = (1.0 + a) ** 4
    return g


def conformal_metric(coords):
    """exp(2 sigma) eta with sigma = 0.1 sin(2 pi x), periodic in x with period 1."""
    factor = np.exp(0.2 * np.sin(TWO_PI * coords[..., 1]))
    g = np.zeros(coords.shape[:-1] + (4, 4))
    g[..., 0, 0] = -factor
    for i in (1, 2, 3):
        g[..., i, i] = factor
    return g


def conformal_metric_symbols():
    t, x, y, z = sp.symbols("t x y z", real=True)
    factor = sp.exp(sp.Rational(1, 5) * sp.sin(2 * sp.pi * x))
    return (t, x, y, z), sp.diag(-factor, factor, factor, factor)


def symbolic_einstein(metric_symbols):
    coords, g = metric_symbols
    g_inv = g.inv()
    gamma = [[[sp.simplify(sum(g_inv[l, s] * (sp.diff(g[s, n], coords[m]) + sp.diff(g[s, m], coords[n])
                                               - sp.diff(g[m, n], coords[s])) for s in range(4)) / 2)
               for n in range(4)] for m in range(4)] for l in range(4)]
    ricci = sp.zeros(4, 4)
    for m in range(4):
        for n in range(4):
            ricci[m, n] = sum(
                sp.diff(gamma[l][m][n], coords[l]) - sp.diff(gamma[l][m][l], coords[n])
                + sum(gamma[l][l][k] * gamma[k][m][n] - gamma[l][n][k] * gamma[k][m][l] for k in range(4))
                for l in range(4)
            )
    scalar = sum(g_inv[m, n] * ricci[m, n] for m in range(4) for n in range(4))
    return sp.lambdify(coords, sp.simplify(ricci - scalar * g / 2), "numpy")

class TestVacuum:
    def test_flat_vacuum_has_zero_residuals(self, flat_grid, trivial_target, constant_taming):
        report = residual_report(configuration(flat_grid, trivial_target, constant_taming))
        assert report.passed
        for equation in ("einstein", "scalar", "em", "polarization"):
            assert report.norms[equation]["max"] == 0.0
            assert report.status[equation] == "pass"

    def test_report_serialization(self, flat_grid, trivial_target, constant_taming):
        report = residual_report(configuration(flat_grid, trivial_target, constant_taming))
        assert "fields" not in report.to_dict()
        dumped = report.to_dict(dump_fields=True)
        assert dumped["fields"]["einstein"].shape == (8, 8, 8, 8, 4, 4)
        assert dumped["grid"]["shape"] == [8, 8, 8, 8]

    def test_scalar_residual_sees_the_potential(self, flat_grid, trivial_target, constant_taming):
        target = ScalarTarget(1, (None,), trivial_target.metric, ExpressionField(1, "y0**2/2"),
                              trivial_target.monodromy, gradient_field=ExpressionField(1, ["y0"]))
        phi = np.full(tuple(flat_grid.shape) + (1,), 0.5)
        report = residual_report(configuration(flat_grid, target, constant_taming, phi=phi))
        assert report.status["scalar"] == "fail"
        assert report.norms["scalar"]["max"] == pytest.approx(0.5)
        assert report.status["em"] == "pass"

    def test_coarse_time_direction_is_reported(self, trivial_target, constant_taming):
        grid = SpacetimeGrid((4, 8, 8, 8), (0.125,) * 4, (False, True, True, True))
        report = residual_report(configuration(grid, trivial_target, constant_taming))
        assert report.status["einstein"] == "error: GridTooCoarse"
        assert report.status["em"] == "pass"
        assert not report.passed


class TestCurvature:
    def test_schwarzschild_is_second_order(self):
        values = []
        for spacing, nodes, center in ((0.125, 9, 4), (0.0625, 17, 8)):
            grid = SpacetimeGrid((3, nodes, nodes, nodes), (0.5, spacing, spacing, spacing),
                                 (True, False, False, False), origin=(0.0, 2.0, -0.5, -0.5))
            g = LorentzMetricField.from_function(grid, isotropic_schwarzschild)
            values.append(np.linalg.norm(einstein_tensor(g)[0, center, center, center]))
        assert values[0] > 0
        assert 1.8 <= np.log2(values[0] / values[1]) <= 2.2

    def test_conformally_flat_matches_symbolic_einstein(self):
        exact = symbolic_einstein(conformal_metric_symbols())
        errors = []
        for nodes, index in ((32, 4), (64, 8)):
            grid = SpacetimeGrid((5, nodes, 3, 3), (0.25, 1.0 / nodes, 0.25, 0.25),
                                 (False, True, True, True))
            g = LorentzMetricField.from_function(grid, conformal_metric)
            point = grid.coordinates()[2, index, 0, 0]
            expected = np.array(exact(*point), dtype=float)
            errors.append(np.max(np.abs(einstein_tensor(g)[2, index, 0, 0] - expected)))
        assert np.max(np.abs(expected)) > 0.1
        assert 1.8 <= np.log2(errors[0] / errors[1]) <= 2.2

    def test_constant_metric_is_flat(self, flat_grid):
        g = np.broadcast_to(np.diag([-4.0, 1.0, 1.0, 1.0]), (8, 8, 8, 8, 4, 4)).copy()
        assert np.max(np.abs(einstein_tensor(LorentzMetricField.build(flat_grid, g)))) == 0.0


class TestElectromagnetic:
    def test_plane_wave_converges_at_second_order(self, trivial_target, constant_taming):
        grid = SpacetimeGrid((8, 8, 4, 4), (0.0625, 0.125, 0.25, 0.25), (False, True, True, True))
        coarse = residual_report(configuration(grid, trivial_target, constant_taming, v=plane_wave(grid)))
        fine_grid = grid.refine(2)
        fine = residual_report(configuration(fine_grid, trivial_target, constant_taming, v=plane_wave(fine_grid)))
        order = convergence_order(coarse, fine, 2, "em")
        assert 3.5 <= order["ratio_max"] <= 4.5
        assert order["order_max"] == pytest.approx(np.log2(order["ratio_max"]))

    def test_equal_spacings_are_exact(self, flat_grid, trivial_target, constant_taming):
        report = residual_report(configuration(flat_grid, trivial_target, constant_taming, v=plane_wave(flat_grid)))
        assert report.norms["em"]["max"] < 1e-10

    def test_polarization_is_enforced(self, flat_grid, trivial_target, constant_taming):
        cfg = configuration(flat_grid, trivial_target, constant_taming, v=plane_wave(flat_grid))
        with pytest.raises(PolarizationError):
            cfg.validate()

    def test_rank_mismatch(self, flat_grid, trivial_target, constant_taming):
        transitions = transitions_for(flat_grid, trivial_target)
        with pytest.raises(DimensionError):
            configuration(flat_grid, trivial_target, constant_taming).with_fields(
                v=TwistedTwoForm.zeros(flat_grid, transitions, 4)
            )


class TestScalarSector:
    def test_unitary_limit_decouples_the_scalar(self, flat_grid, trivial_target, constant_taming):
        x = flat_grid.coordinates()
        phi = 0.2 * x[..., 0:1]
        cfg = configuration(flat_grid, trivial_target, constant_taming, phi=phi, v=plane_wave(flat_grid))
        assert np.max(np.abs(psi_at_nodes(cfg))) == 0.0
        np.testing.assert_allclose(scalar_residual(cfg), modified_tension(cfg), atol=1e-14)
        assert np.max(np.abs(scalar_residual(cfg))) < 1e-10


class TestDiscreteCovariance:
    def test_even_relabeling_preserves_norms(self, flat_grid, trivial_target, constant_taming):
        cfg = configuration(flat_grid, trivial_target, constant_taming, v=plane_wave(flat_grid))
        moved = relabel_axes(cfg, [1, 0, 3, 2])
        a, b = residual_report(cfg), residual_report(moved)
        for equation in ("em", "polarization", "scalar"):
            assert b.norms[equation]["max"] == pytest.approx(a.norms[equation]["max"], abs=1e-10)

    def test_odd_relabeling_is_rejected(self, flat_grid, trivial_target, constant_taming):
        with pytest.raises(DimensionError):
            relabel_axes(configuration(flat_grid, trivial_target, constant_taming), [1, 0, 2, 3])


def test_convergence_order_from_norms():
    grid = {"shape": [8, 8, 8, 8]}
    coarse = ResidualReport({"em": {"max": 0.4, "rms": 0.2}}, {"em": "fail"}, grid)
    fine = ResidualReport({"em": {"max": 0.1, "rms": 0.05}}, {"em": "fail"}, grid)
    order = convergence_order(coarse, fine, 2, "em")
    assert order["order_max"] == pytest.approx(2.0)
    assert order["ratio_rms"] == pytest.approx(4.0)
