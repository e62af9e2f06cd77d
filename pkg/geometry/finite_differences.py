"""
Second-order finite differences on node arrays.

Arrays carry the grid axes first (one per direction) followed by component
axes. Periodic directions wrap around a cut; the values beyond the cut are
obtained from the values on the other side by a ``Cut`` (a twist matrix for
bundle-valued fields, an additive shift for lifted maps, nothing for
ordinary periodic fields). Non-periodic directions use one-sided second
order stencils at the two boundary layers.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from utils.errors import GridTooCoarse


@dataclass(frozen=True, eq=False)
class Cut:
    """
    Identification across a periodic cut.

    Values at x + L are ``matrix @ v + shift`` where v is the value at x, or
    ``matrix @ v @ matrix^-1`` for endomorphism-valued fields (``conjugate``).
    ``matrix`` acts on the fiber axis ``fiber_axis`` counted from the
    component axes (0 = first component axis).
    """

    matrix: Optional[np.ndarray] = None
    shift: Optional[np.ndarray] = None
    fiber_axis: int = 0
    conjugate: bool = False

    def forward(self, values: np.ndarray, grid_ndim: int) -> np.ndarray:
        return self._apply(values, grid_ndim, self.matrix, self.shift)

    def backward(self, values: np.ndarray, grid_ndim: int) -> np.ndarray:
        inverse = None if self.matrix is None else np.linalg.inv(self.matrix)
        shift = None if self.shift is None else -(self.shift if inverse is None else inverse @ self.shift)
        return self._apply(values, grid_ndim, inverse, shift)

    def _apply(self, values, grid_ndim, matrix, shift):
        out = values
        if matrix is not None and self.conjugate:
            out = matrix @ out @ np.linalg.inv(matrix)
        elif matrix is not None:
            axis = grid_ndim + self.fiber_axis
            out = np.moveaxis(np.tensordot(matrix, np.moveaxis(out, axis, 0), axes=(1, 0)), 0, axis)
        if shift is not None:
            out = out + shift
        return out

    @property
    def is_trivial(self) -> bool:
        return self.matrix is None and self.shift is None


PLAIN = Cut()


def _slab(values: np.ndarray, axis: int, index) -> np.ndarray:
    sl = [slice(None)] * values.ndim
    sl[axis] = index
    return values[tuple(sl)]


def neighbours(values: np.ndarray, axis: int, periodic: bool, cut: Cut, grid_ndim: int):
    """Values at x + h and x - h along a periodic axis, twisted across the cut."""
    plus = np.roll(values, -1, axis=axis)
    minus = np.roll(values, 1, axis=axis)
    if not cut.is_trivial:
        last = plus.shape[axis] - 1
        index_last = [slice(None)] * values.ndim
        index_last[axis] = slice(last, last + 1)
        index_first = [slice(None)] * values.ndim
        index_first[axis] = slice(0, 1)
        plus[tuple(index_last)] = cut.forward(_slab(values, axis, slice(0, 1)), grid_ndim)
        minus[tuple(index_first)] = cut.backward(_slab(values, axis, slice(last, last + 1)), grid_ndim)
    return plus, minus


def derivative(
    values: np.ndarray,
    axis: int,
    h: float,
    periodic: bool,
    cut: Cut = PLAIN,
    grid_ndim: int = 4,
) -> np.ndarray:
    """
    First derivative along a grid axis.

    Raises:
        GridTooCoarse: if fewer than 3 nodes lie along the axis
    """
    n = values.shape[axis]
    if n < 3:
        raise GridTooCoarse(f"axis {axis} has {n} nodes; central differences need 3")
    if periodic:
        plus, minus = neighbours(values, axis, True, cut, grid_ndim)
        return (plus - minus) / (2.0 * h)

    out = np.empty_like(values, dtype=float)
    inner = [slice(None)] * values.ndim
    inner[axis] = slice(1, n - 1)
    out[tuple(inner)] = (_slab(values, axis, slice(2, n)) - _slab(values, axis, slice(0, n - 2))) / (2.0 * h)
    f0, f1, f2 = (_slab(values, axis, i) for i in (0, 1, 2))
    g0, g1, g2 = (_slab(values, axis, i) for i in (n - 1, n - 2, n - 3))
    first = [slice(None)] * values.ndim
    first[axis] = 0
    last = [slice(None)] * values.ndim
    last[axis] = n - 1
    out[tuple(first)] = (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)
    out[tuple(last)] = (3.0 * g0 - 4.0 * g1 + g2) / (2.0 * h)
    return out


def second_derivative(
    values: np.ndarray,
    axis: int,
    h: float,
    periodic: bool,
    cut: Cut = PLAIN,
    grid_ndim: int = 4,
) -> np.ndarray:
    """Compact second derivative along one axis (one-sided 4-point stencil at boundaries)."""
    n = values.shape[axis]
    if periodic:
        if n < 3:
            raise GridTooCoarse(f"axis {axis} has {n} nodes; second differences need 3")
        plus, minus = neighbours(values, axis, True, cut, grid_ndim)
        return (plus - 2.0 * values + minus) / (h * h)
    if n < 4:
        raise GridTooCoarse(f"axis {axis} has {n} nodes; one-sided second differences need 4")
    out = np.empty_like(values, dtype=float)
    inner = [slice(None)] * values.ndim
    inner[axis] = slice(1, n - 1)
    out[tuple(inner)] = (
        _slab(values, axis, slice(2, n)) - 2.0 * _slab(values, axis, slice(1, n - 1))
        + _slab(values, axis, slice(0, n - 2))
    ) / (h * h)
    f = [_slab(values, axis, i) for i in range(4)]
    g = [_slab(values, axis, n - 1 - i) for i in range(4)]
    first = [slice(None)] * values.ndim
    first[axis] = 0
    last = [slice(None)] * values.ndim
    last[axis] = n - 1
    out[tuple(first)] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h)
    out[tuple(last)] = (2.0 * g[0] - 5.0 * g[1] + 4.0 * g[2] - g[3]) / (h * h)
    return out


def gradient(
    values: np.ndarray,
    spacing: Sequence[float],
    periodic: Sequence[bool],
    cuts: Optional[Sequence[Cut]] = None,
) -> np.ndarray:
    """Stack of first derivatives along every grid axis, derivative index last-but-components."""
    grid_ndim = len(spacing)
    cuts = cuts or [PLAIN] * grid_ndim
    parts = [derivative(values, ax, spacing[ax], periodic[ax], cuts[ax], grid_ndim) for ax in range(grid_ndim)]
    return np.stack(parts, axis=grid_ndim)


def interior_mask(shape: Sequence[int], periodic: Sequence[bool], margin: int) -> np.ndarray:
    """Boolean mask excluding ``margin`` layers next to non-periodic boundaries."""
    mask = np.ones(tuple(shape), dtype=bool)
    for ax, (n, per) in enumerate(zip(shape, periodic)):
        if per or margin <= 0:
            continue
        sl = [slice(None)] * len(shape)
        sl[ax] = slice(0, min(margin, n))
        mask[tuple(sl)] = False
        sl[ax] = slice(max(n - margin, 0), n)
        mask[tuple(sl)] = False
    return mask
