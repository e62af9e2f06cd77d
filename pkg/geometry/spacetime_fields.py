"""
Discretized configurations on a four-dimensional chart grid.

Node arrays carry the four grid axes first. Tensor components follow with
the fiber index before the form indices, so a twisted two-form has shape
(N0, N1, N2, N3, 2n, 4, 4) and V[..., a, mu, nu] is V^a_{mu nu}.

Conventions: signature (-,+,+,+), orientation eps_{0123} = +1, and on
two-forms (*F)_{mu nu} = 1/2 sqrt|g| eps_{alpha beta mu nu} F^{alpha beta}.
The twisted Hodge operator is J * and squares to +1 on two-forms.
"""

import itertools
import logging
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from algebra.local_system import Word, transport
from algebra.symplectic_core import to_float
from geometry.finite_differences import Cut, PLAIN, derivative
from geometry.target_geometry import FundamentalField, ScalarTarget, TamingField
from utils.errors import (
    CutCompatibilityError,
    DimensionError,
    GridTooCoarse,
    SignatureError,
    SingularMetric,
)

logger = logging.getLogger("esm.geometry.spacetime")

NDIM = 4


def levi_civita() -> np.ndarray:
    """eps[mu, nu, rho, sigma] with eps[0, 1, 2, 3] = +1."""
    eps = np.zeros((NDIM,) * NDIM)
    for perm in itertools.permutations(range(NDIM)):
        inversions = sum(1 for i in range(NDIM) for j in range(i + 1, NDIM) if perm[i] > perm[j])
        eps[perm] = -1.0 if inversions % 2 else 1.0
    return eps


EPSILON = levi_civita()


@dataclass(frozen=True)
class SpacetimeGrid:
    """Regular chart grid; periodic directions have period L = N h."""

    shape: Tuple[int, ...]
    spacing: Tuple[float, ...]
    periodic: Tuple[bool, ...]
    origin: Tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    phi_winding: Tuple[Optional[Word], ...] = (None, None, None, None)

    def __post_init__(self):
        if not (len(self.shape) == len(self.spacing) == len(self.periodic) == len(self.origin) == NDIM):
            raise DimensionError("spacetime grids are four-dimensional")
        if len(self.phi_winding) != NDIM:
            raise DimensionError("one winding entry per direction is required")
        for axis, n in enumerate(self.shape):
            if n < 3:
                raise GridTooCoarse(f"direction {axis} has {n} nodes; at least 3 are required")
        for axis, h in enumerate(self.spacing):
            if not h > 0:
                raise DimensionError(f"spacing along direction {axis} must be positive")
        for axis, w in enumerate(self.phi_winding):
            if w is not None and len(w) and not self.periodic[axis]:
                raise DimensionError(f"winding given for non-periodic direction {axis}")

    @property
    def periods(self) -> Tuple[Optional[float], ...]:
        return tuple(n * h if p else None for n, h, p in zip(self.shape, self.spacing, self.periodic))

    def axes(self) -> List[np.ndarray]:
        return [o + h * np.arange(n) for o, h, n in zip(self.origin, self.spacing, self.shape)]

    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape (N0, N1, N2, N3, 4)."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def winding(self, axis: int) -> Word:
        w = self.phi_winding[axis]
        return w if w is not None else Word.empty()

    def refine(self, factor: int) -> "SpacetimeGrid":
        """Same extent with spacing divided by ``factor``."""
        shape, spacing = [], []
        for n, h, p in zip(self.shape, self.spacing, self.periodic):
            shape.append(n * factor if p else (n - 1) * factor + 1)
            spacing.append(h / factor)
        return replace(self, shape=tuple(shape), spacing=tuple(spacing))

    def describe(self) -> dict:
        return {
            "shape": list(self.shape),
            "spacing": list(self.spacing),
            "periodic": list(self.periodic),
            "origin": list(self.origin),
        }


def _node_shape(grid: SpacetimeGrid, array: np.ndarray, tail: Tuple[int, ...], what: str) -> None:
    if array.shape != tuple(grid.shape) + tail:
        raise DimensionError(f"{what} has shape {array.shape}, expected {tuple(grid.shape) + tail}")


@dataclass(frozen=True, eq=False)
class LorentzMetricField:
    """Metric samples with cached inverses and volume factors."""

    g: np.ndarray
    g_inv: np.ndarray
    vol: np.ndarray
    grid: SpacetimeGrid

    @classmethod
    def build(cls, grid: SpacetimeGrid, g: np.ndarray) -> "LorentzMetricField":
        """
        Raises:
            SingularMetric: det g = 0 at some node
            SignatureError: signature is not (3, 1) at some node
        """
        g = np.asarray(g, dtype=float)
        _node_shape(grid, g, (NDIM, NDIM), "metric")
        if np.max(np.abs(g - np.swapaxes(g, -1, -2))) > 1e-12 * max(1.0, float(np.max(np.abs(g)))):
            raise DimensionError("metric samples are not symmetric")
        det = np.linalg.det(g)
        if np.any(det == 0) or not np.all(np.isfinite(det)):
            raise SingularMetric("metric is singular at some node")
        negatives = np.sum(np.linalg.eigvalsh(g) < 0, axis=-1)
        if np.any(negatives != 1):
            raise SignatureError("metric does not have signature (3, 1) at every node")
        return cls(g, np.linalg.inv(g), np.sqrt(np.abs(det)), grid)

    @classmethod
    def minkowski(cls, grid: SpacetimeGrid) -> "LorentzMetricField":
        eta = np.diag([-1.0, 1.0, 1.0, 1.0])
        return cls.build(grid, np.broadcast_to(eta, tuple(grid.shape) + (NDIM, NDIM)).copy())

    @classmethod
    def from_function(cls, grid: SpacetimeGrid, func: Callable[[np.ndarray], np.ndarray]) -> "LorentzMetricField":
        return cls.build(grid, func(grid.coordinates()))


@dataclass(frozen=True, eq=False)
class ScalarMapField:
    """Lifted values of the scalar map with the period shift across each cut."""

    phi: np.ndarray
    shifts: Tuple[Optional[np.ndarray], ...]
    grid: SpacetimeGrid

    @classmethod
    def build(cls, grid: SpacetimeGrid, target: ScalarTarget, phi: np.ndarray) -> "ScalarMapField":
        phi = np.asarray(phi, dtype=float)
        _node_shape(grid, phi, (target.dim,), "scalar map")
        shifts = []
        for axis in range(NDIM):
            shifts.append(target.period_vector(grid.winding(axis)) if grid.periodic[axis] else None)
        return cls(phi, tuple(shifts), grid)

    @classmethod
    def from_function(
        cls,
        grid: SpacetimeGrid,
        target: ScalarTarget,
        func: Callable[[np.ndarray], np.ndarray],
        tol: float = 1e-8,
    ) -> "ScalarMapField":
        """
        Sample phi and validate the jump across every periodic cut.

        Raises:
            CutCompatibilityError: phi(x + L e_mu) - phi(x) differs from the winding period
        """
        coords = grid.coordinates()
        out = cls.build(grid, target, func(coords))
        for axis in range(NDIM):
            if not grid.periodic[axis]:
                continue
            shifted = coords.copy()
            shifted[..., axis] += grid.periods[axis]
            jump = np.asarray(func(shifted), dtype=float) - out.phi
            violation = float(np.max(np.abs(jump - out.shifts[axis])))
            if violation > tol:
                raise CutCompatibilityError(
                    f"scalar map jumps inconsistently with its winding along direction {axis}",
                    {"violation": violation},
                )
        return out

    @property
    def dim(self) -> int:
        return self.phi.shape[-1]

    def cut(self, axis: int) -> Cut:
        shift = self.shifts[axis]
        return Cut(shift=shift) if shift is not None and np.any(shift) else PLAIN

    def derivatives(self) -> np.ndarray:
        """d_mu phi^i, shape (..., 4, d)."""
        grid = self.grid
        parts = [derivative(self.phi, ax, grid.spacing[ax], grid.periodic[ax], self.cut(ax)) for ax in range(NDIM)]
        return np.stack(parts, axis=NDIM)


def transitions_for(grid: SpacetimeGrid, target: ScalarTarget) -> Tuple[Optional[np.ndarray], ...]:
    """rho(winding_mu) for each periodic direction (None for non-periodic ones)."""
    out = []
    for axis in range(NDIM):
        if not grid.periodic[axis]:
            out.append(None)
            continue
        out.append(to_float(transport(target.monodromy, grid.winding(axis))))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class TwistedTwoForm:
    """Bundle-valued two-form V^a_{mu nu} with its cut transitions."""

    v: np.ndarray
    transitions: Tuple[Optional[np.ndarray], ...]
    grid: SpacetimeGrid

    @classmethod
    def build(cls, grid: SpacetimeGrid, transitions: Sequence[Optional[np.ndarray]], v: np.ndarray) -> "TwistedTwoForm":
        v = np.asarray(v, dtype=float)
        if v.ndim != NDIM + 3 or v.shape[-2:] != (NDIM, NDIM) or v.shape[:NDIM] != tuple(grid.shape):
            raise DimensionError(f"two-form has shape {v.shape}")
        if np.max(np.abs(v + np.swapaxes(v, -1, -2)), initial=0.0) > 1e-12 * max(1.0, float(np.max(np.abs(v), initial=0.0))):
            raise DimensionError("two-form components are not antisymmetric")
        return cls(v, tuple(transitions), grid)

    @classmethod
    def zeros(cls, grid: SpacetimeGrid, transitions: Sequence[Optional[np.ndarray]], rank: int) -> "TwistedTwoForm":
        return cls(np.zeros(tuple(grid.shape) + (rank, NDIM, NDIM)), tuple(transitions), grid)

    @classmethod
    def from_function(
        cls,
        grid: SpacetimeGrid,
        transitions: Sequence[Optional[np.ndarray]],
        func: Callable[[np.ndarray], np.ndarray],
        tol: float = 1e-8,
    ) -> "TwistedTwoForm":
        """
        Sample a two-form and validate V(x + L e_mu) = rho_mu V(x).

        Raises:
            CutCompatibilityError
        """
        coords = grid.coordinates()
        out = cls.build(grid, transitions, func(coords))
        for axis in range(NDIM):
            if not grid.periodic[axis]:
                continue
            shifted = coords.copy()
            shifted[..., axis] += grid.periods[axis]
            expected = out.cut(axis).forward(out.v, NDIM)
            violation = float(np.max(np.abs(np.asarray(func(shifted)) - expected), initial=0.0))
            if violation > tol:
                raise CutCompatibilityError(
                    f"two-form is not cut compatible along direction {axis}", {"violation": violation}
                )
        return out

    @property
    def rank(self) -> int:
        return self.v.shape[NDIM]

    def cut(self, axis: int) -> Cut:
        rho = self.transitions[axis]
        return Cut(matrix=rho, fiber_axis=0) if rho is not None else PLAIN

    def with_values(self, v: np.ndarray) -> "TwistedTwoForm":
        return TwistedTwoForm(v, self.transitions, self.grid)

    def __add__(self, other: "TwistedTwoForm") -> "TwistedTwoForm":
        return self.with_values(self.v + other.v)

    def __sub__(self, other: "TwistedTwoForm") -> "TwistedTwoForm":
        return self.with_values(self.v - other.v)

    def scaled(self, c: float) -> "TwistedTwoForm":
        return self.with_values(c * self.v)


@dataclass(frozen=True, eq=False)
class HodgeContext:
    """Metric and pulled-back taming data at every node."""

    metric: LorentzMetricField
    j: np.ndarray
    q: np.ndarray

    @classmethod
    def build(cls, metric: LorentzMetricField, taming: TamingField, phi: ScalarMapField) -> "HodgeContext":
        j = taming.at(phi.phi)
        q = np.einsum("ab,...bc->...ac", taming.sp.omega_float, j)
        q = 0.5 * (q + np.swapaxes(q, -1, -2))
        return cls(metric, j, q)


def raise_indices(g_inv: np.ndarray, f: np.ndarray) -> np.ndarray:
    """F^{mu nu} = g^{mu alpha} g^{nu beta} F_{alpha beta} (fiber index kept)."""
    return np.einsum("...ma,...nb,...cab->...cmn", g_inv, g_inv, f)


def hodge_star(metric: LorentzMetricField, f: np.ndarray) -> np.ndarray:
    """Untwisted Hodge dual of fiber-indexed two-form components."""
    up = raise_indices(metric.g_inv, f)
    return 0.5 * metric.vol[..., None, None, None] * np.einsum("abmn,...cab->...cmn", EPSILON, up)


def twisted_hodge(ctx: HodgeContext, v: TwistedTwoForm) -> TwistedTwoForm:
    """(*V)^a = J(phi(x))^a_b (*_g V^b)."""
    star = hodge_star(ctx.metric, v.v)
    return v.with_values(np.einsum("...ab,...bmn->...amn", ctx.j, star))


def polarize(v: TwistedTwoForm, ctx: HodgeContext) -> TwistedTwoForm:
    """Positive projection P+ V = (V + *V) / 2."""
    return v.with_values(0.5 * (v.v + twisted_hodge(ctx, v).v))


def anti_polarize(v: TwistedTwoForm, ctx: HodgeContext) -> TwistedTwoForm:
    """Negative projection P- V = (V - *V) / 2."""
    return v.with_values(0.5 * (v.v - twisted_hodge(ctx, v).v))


def q_norm2(q: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Pointwise Q-norm of a fiber-valued form with Euclidean index sums, normalized by p!."""
    degree = f.ndim - q.ndim + 1
    letters = "mnlk"[:degree]
    total = np.einsum(f"...ab,...a{letters},...b{letters}->...", q, f, f)
    factorial = float(np.prod(np.arange(1, degree + 1)))
    return np.sqrt(np.abs(total) / factorial)


def polarization_violation(v: TwistedTwoForm, ctx: HodgeContext) -> np.ndarray:
    """Pointwise Q-norm of *V - V."""
    return q_norm2(ctx.q, twisted_hodge(ctx, v).v - v.v)


def _node_slice(array: np.ndarray, node: Sequence[int]) -> np.ndarray:
    return array[tuple(slice(i, i + 1) for i in node)]


def projector_matrix(ctx: HodgeContext, node: Sequence[int], rank: int) -> np.ndarray:
    """Matrix of P+ on the 6 * 2n dimensional fiber of two-forms at one node."""
    metric = ctx.metric
    local_metric = LorentzMetricField(
        _node_slice(metric.g, node), _node_slice(metric.g_inv, node), _node_slice(metric.vol, node), metric.grid
    )
    local = HodgeContext(local_metric, _node_slice(ctx.j, node), _node_slice(ctx.q, node))
    pairs = [(m, n) for m in range(NDIM) for n in range(m + 1, NDIM)]
    columns = []
    for a in range(rank):
        for m, n in pairs:
            basis = np.zeros((1, 1, 1, 1, rank, NDIM, NDIM))
            basis[..., a, m, n] = 1.0
            basis[..., a, n, m] = -1.0
            image = 0.5 * (basis + np.einsum("...ab,...bmn->...amn", local.j, hodge_star(local.metric, basis)))
            columns.append([image[0, 0, 0, 0, b, r, s] for b in range(rank) for r, s in pairs])
    return np.array(columns).T


def polarization_rank(ctx: HodgeContext, node: Sequence[int], rank: int, tol: float = 1e-9) -> int:
    s = np.linalg.svd(projector_matrix(ctx, node, rank), compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def twisted_d(v: TwistedTwoForm) -> np.ndarray:
    """
    Twisted exterior derivative in the cut trivialization.

    (dV)^a_{lambda mu nu} = d_lambda V_{mu nu} + d_mu V_{nu lambda} + d_nu V_{lambda mu},
    with neighbours across a cut multiplied by the transition matrix.
    """
    grid = v.grid
    dv = np.stack(
        [derivative(v.v, ax, grid.spacing[ax], grid.periodic[ax], v.cut(ax)) for ax in range(NDIM)],
        axis=NDIM + 1,
    )  # [..., a, lambda, mu, nu] = d_lambda V^a_{mu nu}
    return dv + _cyclic(dv)


def _cyclic(dv: np.ndarray) -> np.ndarray:
    """d_mu V_{nu lambda} + d_nu V_{lambda mu} arranged as [..., a, lambda, mu, nu]."""
    second = np.einsum("...amnl->...almn", dv)
    third = np.einsum("...anlm->...almn", dv)
    return second + third


def inner_contraction(v1: TwistedTwoForm, v2: TwistedTwoForm, metric: LorentzMetricField, q: np.ndarray) -> np.ndarray:
    """
    (V1 (/) V2)_{mu nu} = Q_ab V1^a_{mu lambda} g^{lambda sigma} V2^b_{sigma nu}.

    Raises:
        DimensionError
    """
    if v1.v.shape != v2.v.shape:
        raise DimensionError(f"two-forms have shapes {v1.v.shape} and {v2.v.shape}")
    return np.einsum("...ab,...aml,...ls,...bsn->...mn", q, v1.v, metric.g_inv, v2.v)


def scalar_pairing(v: TwistedTwoForm, psi: np.ndarray, ctx: HodgeContext) -> np.ndarray:
    """
    1/2 (*V, Psi^k V) with the 1/2! inner product of two-forms.

    Args:
        v: Twisted two-form
        psi: Psi^k at phi(x), shape (..., d, 2n, 2n)
        ctx: Hodge context

    Returns:
        Array of shape (..., d)
    """
    star = twisted_hodge(ctx, v).v
    psi_v = np.einsum("...kbc,...cmn->...kbmn", psi, v.v)
    psi_v_up = np.einsum("...ma,...nb,...kcab->...kcmn", ctx.metric.g_inv, ctx.metric.g_inv, psi_v)
    return 0.25 * np.einsum("...ac,...amn,...kcmn->...k", ctx.q, star, psi_v_up)


def pulled_back_psi(field_psi: FundamentalField, phi: ScalarMapField) -> np.ndarray:
    """Psi^phi at every node."""
    return field_psi.at(phi.phi)
