"""
Field samplers on the flat target chart.

Every field maps an array of points ``y`` with shape (..., d) to values with
shape (..., *value_shape). Samplers are pure: the same point always gives the
same value.
"""

from abc import ABC, abstractmethod
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
from sympy import Matrix, lambdify, sympify, symbols


def target_symbols(dim: int):
    """The coordinate symbols y0, y1, ... used in expression fields."""
    return symbols(f"y0:{dim}")


class BaseField(ABC):
    """Abstract base class for fields sampled at target points."""

    def __init__(self, dim: int, value_shape: Tuple[int, ...]):
        """
        Initialize the field.

        Args:
            dim: Dimension of the domain
            value_shape: Shape of a single value
        """
        self.dim = dim
        self.value_shape = tuple(value_shape)

    @abstractmethod
    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """
        Evaluate the field.

        Args:
            points: Array of shape (..., dim)

        Returns:
            Array of shape (..., *value_shape)
        """
        ...

    def __call__(self, points: Any) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1:] != (self.dim,):
            pts = pts.reshape(pts.shape + (1,)) if self.dim == 1 else pts
        return self.evaluate(pts)

    @property
    def is_constant(self) -> bool:
        return False


class ConstantField(BaseField):
    """A field with the same value everywhere."""

    def __init__(self, dim: int, value: Any):
        self.value = np.asarray(value, dtype=float)
        super().__init__(dim, self.value.shape)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        batch = points.shape[:-1]
        return np.broadcast_to(self.value, batch + self.value_shape).copy()

    @property
    def is_constant(self) -> bool:
        return True


class ExpressionField(BaseField):
    """A field given by sympy expressions in the coordinates y0, y1, ..."""

    def __init__(self, dim: int, expressions: Any, variables: Optional[Sequence[Any]] = None):
        """
        Args:
            dim: Domain dimension
            expressions: Scalar, nested list or sympy Matrix of expressions/strings
            variables: Symbols (defaults to y0..y{dim-1})
        """
        self.variables = tuple(variables) if variables is not None else target_symbols(dim)
        locals_map = {str(v): v for v in self.variables}
        array = np.array(_sympify_nested(expressions, locals_map), dtype=object)
        self.expressions = array
        self._entries: List[Callable] = [lambdify(self.variables, expr, "numpy") for expr in array.ravel()]
        super().__init__(dim, array.shape)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        batch = points.shape[:-1]
        coords = [points[..., i] for i in range(self.dim)]
        out = np.empty(batch + (len(self._entries),), dtype=float)
        for k, func in enumerate(self._entries):
            out[..., k] = np.broadcast_to(np.asarray(func(*coords), dtype=float), batch)
        return out.reshape(batch + self.value_shape)

    def derivative(self, i: int) -> "ExpressionField":
        """Exact partial derivative with respect to coordinate i."""
        diff = np.vectorize(lambda e: e.diff(self.variables[i]), otypes=[object])(self.expressions)
        return ExpressionField(self.dim, diff.tolist() if diff.shape else diff.item(), self.variables)

    @property
    def is_constant(self) -> bool:
        return all(not e.free_symbols for e in self.expressions.ravel())


class CallableField(BaseField):
    """Wraps a vectorized Python callable ``f(points) -> values``."""

    def __init__(self, dim: int, value_shape: Tuple[int, ...], func: Callable[[np.ndarray], np.ndarray]):
        super().__init__(dim, value_shape)
        self.func = func

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        values = np.asarray(self.func(points), dtype=float)
        return np.broadcast_to(values, points.shape[:-1] + self.value_shape).copy()


class ConjugatedField(BaseField):
    """y -> E(y) J0 E(y)^-1 for a matrix-valued frame field E."""

    def __init__(self, frame: BaseField, base: Any):
        self.frame = frame
        self.base = np.asarray(base, dtype=float)
        super().__init__(frame.dim, self.base.shape)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        e = self.frame.evaluate(points)
        return e @ self.base @ np.linalg.inv(e)

    @property
    def is_constant(self) -> bool:
        return self.frame.is_constant


class AffinePullbackField(BaseField):
    """
    y -> L . f(A^-1 (y - tau)) . R for constant matrices L, R.

    Used to transport a taming along a duality transformation
    (L = F, R = F^-1) and to precompose a field with an affine map.
    """

    def __init__(self, base: BaseField, a: Any, tau: Any, left: Any = None, right: Any = None):
        self.base = base
        self.a_inv = np.linalg.inv(np.atleast_2d(np.asarray(a, dtype=float)))
        self.tau = np.atleast_1d(np.asarray(tau, dtype=float))
        self.left = None if left is None else np.asarray(left, dtype=float)
        self.right = None if right is None else np.asarray(right, dtype=float)
        super().__init__(base.dim, base.value_shape)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pre = np.einsum("ij,...j->...i", self.a_inv, points - self.tau)
        values = self.base.evaluate(pre)
        if self.left is not None:
            values = self.left @ values
        if self.right is not None:
            values = values @ self.right
        return values

    @property
    def is_constant(self) -> bool:
        return self.base.is_constant


def _sympify_nested(value: Any, locals_map):
    if isinstance(value, Matrix):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        return [_sympify_nested(v, locals_map) for v in value]
    return sympify(value, locals=locals_map)
