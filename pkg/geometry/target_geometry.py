"""
Scalar-electromagnetic structure on a flat target chart.

The scalar manifold is R^d with optional periodic coordinates. It carries the
metric G, the potential Phi, a taming field J and a monodromy representation
of Z^k (one generator per periodic coordinate). The flat connection is
trivialized on the cut chart, so covariant derivatives are ordinary
derivatives and the monodromy only enters through wrap-around across cuts.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from algebra.local_system import MonodromyRep, Word, transport
from algebra.symplectic_core import SymplecticSpace, to_float, validate_taming
from geometry.fields import BaseField, ConstantField, ExpressionField
from geometry.finite_differences import Cut, derivative
from utils.errors import (
    DimensionError,
    GridTooCoarse,
    NonGlobalSection,
    SingularMetric,
)

logger = logging.getLogger("esm.geometry.target")


@dataclass(frozen=True)
class ScalarTarget:
    """Flat-chart model of the scalar structure (M, G, Phi) with its monodromy."""

    dim: int
    periods: Tuple[Optional[float], ...]
    metric: BaseField
    potential: BaseField
    monodromy: MonodromyRep
    gradient_field: Optional[BaseField] = None
    step: float = 1e-4

    def __post_init__(self):
        if len(self.periods) != self.dim:
            raise DimensionError(f"{len(self.periods)} period entries for a {self.dim}-dimensional target")
        if self.metric.value_shape != (self.dim, self.dim):
            raise DimensionError(f"metric values have shape {self.metric.value_shape}")
        if self.potential.value_shape != ():
            raise DimensionError("potential must be scalar valued")
        if self.monodromy.presentation.rank != len(self.periodic_axes):
            raise DimensionError(
                f"monodromy has {self.monodromy.presentation.rank} generators "
                f"for {len(self.periodic_axes)} periodic directions"
            )

    @property
    def periodic_axes(self) -> List[int]:
        return [i for i, p in enumerate(self.periods) if p is not None]

    @property
    def sp(self) -> SymplecticSpace:
        return self.monodromy.sp

    def generator_of_axis(self, axis: int) -> int:
        return self.periodic_axes.index(axis)

    def axis_of_generator(self, index: int) -> int:
        return self.periodic_axes[index]

    def period_vector(self, w: Word) -> np.ndarray:
        """Lift shift of a loop: sum of exponents times L_i e_i."""
        out = np.zeros(self.dim)
        for g, e in w.letters:
            axis = self.axis_of_generator(g)
            out[axis] += e * self.periods[axis]
        return out

    def metric_at(self, y: np.ndarray) -> np.ndarray:
        return self.metric(y)

    def metric_inverse_at(self, y: np.ndarray) -> np.ndarray:
        g = self.metric(y)
        det = np.linalg.det(g)
        if np.any(np.abs(det) <= 1e-300):
            raise SingularMetric("target metric is singular at a sample point")
        return np.linalg.inv(g)

    def potential_at(self, y: np.ndarray) -> np.ndarray:
        return self.potential(y)

    def gradient_at(self, y: np.ndarray) -> np.ndarray:
        """dPhi, analytic when supplied, otherwise 4-point central differences."""
        y = np.asarray(y, dtype=float)
        if self.gradient_field is not None:
            return self.gradient_field(y)
        if self.potential.is_constant:
            return np.zeros(y.shape[:-1] + (self.dim,))
        h = self.step
        parts = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = h
            parts.append((-self.potential(y + 2 * e) + 8 * self.potential(y + e)
                          - 8 * self.potential(y - e) + self.potential(y - 2 * e)) / (12 * h))
        return np.stack(parts, axis=-1)

    def sharp_gradient_at(self, y: np.ndarray) -> np.ndarray:
        """grad_G Phi = G^-1 dPhi."""
        return np.einsum("...ij,...j->...i", self.metric_inverse_at(y), self.gradient_at(y))

    def christoffel_at(self, y: np.ndarray) -> np.ndarray:
        """Gamma^k_ij of G, shape (..., d, d, d), by central differences of the metric."""
        y = np.asarray(y, dtype=float)
        if self.metric.is_constant:
            return np.zeros(y.shape[:-1] + (self.dim,) * 3)
        h = self.step
        dg = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = h
            dg.append((self.metric(y + e) - self.metric(y - e)) / (2 * h))
        dg = np.stack(dg, axis=-3)  # [..., l, i, j] = d_l G_ij
        lower = 0.5 * (np.einsum("...ilj->...lij", dg) + np.einsum("...jli->...lij", dg) - dg)
        return np.einsum("...kl,...lij->...kij", self.metric_inverse_at(y), lower)

    def check_metric(self, points: np.ndarray) -> None:
        eig = np.linalg.eigvalsh(self.metric(points))
        if np.any(eig <= 0):
            raise SingularMetric("target metric is not positive definite on the sample grid")


@dataclass(frozen=True)
class TargetGrid:
    """Regular sample grid on the target chart."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    counts: Tuple[int, ...]
    periodic: Tuple[bool, ...]

    @classmethod
    def for_target(cls, target: ScalarTarget, counts: Sequence[int], bounds: Optional[Sequence[Tuple[float, float]]] = None):
        """Periodic coordinates sample [0, L) without the closing point."""
        lower, upper, periodic = [], [], []
        for i, p in enumerate(target.periods):
            if p is not None:
                lower.append(0.0)
                upper.append(float(p))
                periodic.append(True)
            else:
                lo, hi = bounds[i] if bounds else (-1.0, 1.0)
                lower.append(float(lo))
                upper.append(float(hi))
                periodic.append(False)
        return cls(tuple(lower), tuple(upper), tuple(int(c) for c in counts), tuple(periodic))

    @property
    def spacing(self) -> Tuple[float, ...]:
        out = []
        for lo, hi, n, per in zip(self.lower, self.upper, self.counts, self.periodic):
            out.append((hi - lo) / n if per else (hi - lo) / max(n - 1, 1))
        return tuple(out)

    def axes(self) -> List[np.ndarray]:
        return [lo + h * np.arange(n) for lo, h, n in zip(self.lower, self.spacing, self.counts)]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)


@dataclass(frozen=True)
class TamingField:
    """A taming J(y) of the fiber with the grid it is validated and differenced on."""

    j_field: BaseField
    sample_grid: TargetGrid
    target: ScalarTarget = field(repr=False)

    @property
    def sp(self) -> SymplecticSpace:
        return self.target.sp

    def validate(self, tol: float = 1e-8) -> int:
        """validate_taming at every sample; returns the number of samples checked."""
        values = self.j_field(self.sample_grid.points())
        flat = values.reshape(-1, self.sp.dim, self.sp.dim)
        for jv in flat:
            validate_taming(jv, self.sp, tol)
        return flat.shape[0]

    def at(self, y: np.ndarray) -> np.ndarray:
        """
        J at arbitrary points, extended from the fundamental domain.

        Periodic coordinates are reduced into [0, L) and the value is conjugated
        by the corresponding monodromy power.
        """
        y = np.array(y, dtype=float)
        if not self.target.periodic_axes:
            return self.j_field(y)
        shifts = np.zeros(y.shape[:-1] + (len(self.target.periodic_axes),), dtype=int)
        for g, axis in enumerate(self.target.periodic_axes):
            period = self.target.periods[axis]
            m = np.floor(y[..., axis] / period + 1e-12).astype(int)
            shifts[..., g] = m
            y[..., axis] = y[..., axis] - m * period
        values = self.j_field(y)
        if not np.any(shifts):
            return values
        flat_shifts = shifts.reshape(-1, shifts.shape[-1])
        flat_values = values.reshape((-1,) + values.shape[-2:])
        for key in {tuple(s) for s in flat_shifts.tolist()}:
            if not any(key):
                continue
            rho = self._holonomy(key)
            rho_inv = np.linalg.inv(rho)
            sel = np.all(flat_shifts == np.array(key), axis=1)
            flat_values[sel] = rho @ flat_values[sel] @ rho_inv
        return flat_values.reshape(values.shape)

    def _holonomy(self, powers: Tuple[int, ...]) -> np.ndarray:
        letters = []
        for g, m in enumerate(powers):
            letters.extend([(g, 1 if m > 0 else -1)] * abs(m))
        return to_float(transport(self.target.monodromy, Word(tuple(letters))))


@dataclass(frozen=True)
class FundamentalFormField:
    """Theta_i = dJ/dy^i sampled on the taming grid, with pointwise evaluation."""

    theta: np.ndarray  # (*counts, d, 2n, 2n)
    taming: TamingField = field(repr=False)
    step: float = 1e-3

    def at(self, y: np.ndarray) -> np.ndarray:
        """Central-difference Theta at arbitrary points, shape (..., d, 2n, 2n)."""
        y = np.asarray(y, dtype=float)
        d = self.taming.target.dim
        parts = []
        for i in range(d):
            e = np.zeros(d)
            e[i] = self.step
            parts.append((self.taming.at(y + e) - self.taming.at(y - e)) / (2 * self.step))
        return np.stack(parts, axis=-3)


def fundamental_form(t: ScalarTarget, jf: TamingField, step: float = 1e-3) -> FundamentalFormField:
    """
    Fundamental form of the electromagnetic structure by central differences.

    Across a periodic cut, neighbour values are conjugated by the monodromy
    before differencing.

    Raises:
        GridTooCoarse: fewer than 3 samples along a direction
    """
    grid = jf.sample_grid
    for axis, n in enumerate(grid.counts):
        if n < 3:
            raise GridTooCoarse(f"target direction {axis} has {n} samples; need at least 3")
    values = jf.j_field(grid.points())
    if jf.j_field.is_constant and t.monodromy.exact and all(
        t.monodromy.is_identity(img) for img in t.monodromy.images
    ):
        theta = np.zeros(values.shape[:t.dim] + (t.dim,) + values.shape[t.dim:])
        return FundamentalFormField(theta, jf, step)

    parts = []
    for axis in range(t.dim):
        cut = Cut()
        if grid.periodic[axis]:
            rho = to_float(t.monodromy.images[t.generator_of_axis(axis)])
            cut = Cut(matrix=rho, conjugate=True)
        parts.append(derivative(values, axis, grid.spacing[axis], grid.periodic[axis], cut, t.dim))
    theta = np.stack(parts, axis=t.dim)
    logger.debug(f"fundamental form on {grid.counts} samples, max |Theta| = {np.max(np.abs(theta)):.3e}")
    return FundamentalFormField(theta, jf, step)


def is_unitary(ff: FundamentalFormField, tol: float) -> bool:
    """True iff max |Theta_i(y)| over samples and directions is within tol."""
    if ff.theta.size == 0:
        return True
    return bool(np.max(np.abs(ff.theta)) <= tol)


@dataclass(frozen=True)
class FundamentalField:
    """Psi^i = G^ij Theta_j on the sample grid, with pointwise evaluation."""

    psi: np.ndarray
    form: FundamentalFormField = field(repr=False)

    def at(self, y: np.ndarray) -> np.ndarray:
        target = self.form.taming.target
        theta = self.form.at(y)
        return np.einsum("...ij,...jab->...iab", target.metric_inverse_at(y), theta)


def fundamental_field(t: ScalarTarget, ff: FundamentalFormField) -> FundamentalField:
    """
    Raise the direction index of the fundamental form with the inverse metric.

    Raises:
        SingularMetric
    """
    points = ff.taming.sample_grid.points()
    ginv = t.metric_inverse_at(points)
    psi = np.einsum("...ij,...jab->...iab", ginv, ff.theta)
    return FundamentalField(psi, ff)


def check_twisted_periodicity(t: ScalarTarget, jf: TamingField, tol: float = 1e-8, strict: bool = False) -> Dict[str, Any]:
    """
    Max violation of J(y + L_i e_i) = rho_i J(y) rho_i^-1 over the sample grid.

    Raises:
        NonGlobalSection: when strict and the violation exceeds tol
    """
    points = jf.sample_grid.points()
    base = jf.j_field(points)
    per_axis = {}
    for g, axis in enumerate(t.periodic_axes):
        shifted = points.copy()
        shifted[..., axis] += t.periods[axis]
        rho = to_float(t.monodromy.images[g])
        expected = rho @ base @ np.linalg.inv(rho)
        per_axis[t.monodromy.presentation.generators[g]] = float(np.max(np.abs(jf.j_field(shifted) - expected)))
    violation = max(per_axis.values(), default=0.0)
    report = {"violation": violation, "per_generator": per_axis, "tolerance": tol, "ok": violation <= tol}
    if violation > tol:
        message = f"taming is not a global section: twisted periodicity violated by {violation:.3e}"
        if strict:
            raise NonGlobalSection(message, {"violation": violation})
        logger.warning(message)
    return report


def ufold_frame(length: float) -> ExpressionField:
    """E(y) = [[1, y/L], [0, 1]], satisfying E(y + L) = [[1, 1], [0, 1]] E(y)."""
    return ExpressionField(1, [[1, f"y0/({length})"], [0, 1]])


def constant_target(dim: int, sp: SymplecticSpace, monodromy: MonodromyRep, periods=None, metric=None, potential=0.0):
    """Convenience constructor for targets with constant metric and potential."""
    periods = tuple(periods) if periods is not None else (None,) * dim
    metric = np.eye(dim) if metric is None else np.asarray(metric, dtype=float)
    return ScalarTarget(dim, periods, ConstantField(dim, metric), ConstantField(dim, potential), monodromy)
