"""Shared fixtures for the esmcheck test suite."""

import os
import sys

import numpy as np
import pytest
from sympy import ImmutableMatrix

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from algebra.local_system import GroupPresentation, MonodromyRep  # noqa: E402
from algebra.symplectic_core import EsmParameters, IntegralLattice, SymplecticSpace  # noqa: E402
from geometry.fields import ConjugatedField, ConstantField  # noqa: E402
from geometry.spacetime_fields import SpacetimeGrid  # noqa: E402
from geometry.target_geometry import ScalarTarget, TamingField, TargetGrid, ufold_frame  # noqa: E402

PARABOLIC = ImmutableMatrix([[1, 1], [0, 1]])
J0 = np.array([[0.0, -1.0], [1.0, 0.0]])


@pytest.fixture
def sp2():
    return SymplecticSpace.standard(1)


@pytest.fixture
def sp4():
    return SymplecticSpace.standard(2)


@pytest.fixture
def params():
    return EsmParameters()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def flat_grid():
    """8^4 grid, time non-periodic, space periodic with unit periods."""
    return SpacetimeGrid((8, 8, 8, 8), (0.125,) * 4, (False, True, True, True))


@pytest.fixture
def trivial_target(sp2):
    """Non-compact line target with trivial monodromy and standard lattice."""
    rep = MonodromyRep.build(GroupPresentation.free_abelian(0), sp2, [], IntegralLattice.standard(sp2))
    return ScalarTarget(1, (None,), ConstantField(1, np.eye(1)), ConstantField(1, 0.0), rep)


@pytest.fixture
def ufold_target(sp2):
    """Unit circle target with parabolic monodromy around the circle."""
    rep = MonodromyRep.build(GroupPresentation.free_abelian(1), sp2, [PARABOLIC], IntegralLattice.standard(sp2))
    return ScalarTarget(1, (1.0,), ConstantField(1, np.eye(1)), ConstantField(1, 0.0), rep)


@pytest.fixture
def ufold_taming(ufold_target):
    grid = TargetGrid.for_target(ufold_target, [8])
    return TamingField(ConjugatedField(ufold_frame(1.0), J0), grid, ufold_target)


@pytest.fixture
def constant_taming(trivial_target):
    grid = TargetGrid.for_target(trivial_target, [5], [(-1.0, 1.0)])
    return TamingField(ConstantField(1, J0), grid, trivial_target)
