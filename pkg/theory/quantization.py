"""
Twisted Dirac quantization on cubical torus complexes.

The cochain model is the minimal cubical structure of a torus quotient: one
k-cell per set of k periodic directions. Transitions of the local system sit
on the incidences that cross a cut, so the coboundary is the Koszul complex
of the commuting transition matrices:

    (delta c)(S) = sum_j (-1)^j (T_{S_j} - 1) c(S minus S_j)

Real cohomology uses SVD ranks; integer cohomology uses exact Smith normal
forms in lattice coordinates.
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sympy import ImmutableMatrix, Matrix, eye, zeros

from algebra.integer_forms import as_integer_matrix, integer_kernel, row_hermite_normal_form, smith_normal_form
from algebra.local_system import GroupPresentation, MonodromyRep, Word, transport
from algebra.symplectic_core import (
    DEFAULT_TOLERANCES,
    IntegralLattice,
    is_symplectic,
    lattice_coordinates,
    preserves,
    to_float,
)
from geometry.spacetime_fields import NDIM, SpacetimeGrid, TwistedTwoForm
from geometry.target_geometry import ScalarTarget
from utils.errors import ComplexMismatch, InvalidComplex, LatticeNotPreserved, NotIntegral

logger = logging.getLogger("esm.theory.quantization")

CUBICAL_MODEL = "cubical torus quotient"
AXIS_NAMES = ("t", "x", "y", "z")


@dataclass(frozen=True)
class Incidence:
    """One term of a cell boundary: sign * transition applied to the face value."""

    face: int
    sign: int
    transition: Optional[ImmutableMatrix] = None


@dataclass(frozen=True, eq=False)
class TwistedCellComplex:
    """
    Finite cell complex with local coefficients in a monodromy representation.

    ``boundary[k][i]`` lists the incidences of the i-th k-cell on (k-1)-cells.
    ``axes`` records, for grid complexes, which spacetime direction each
    generator of the representation belongs to.
    """

    cells: Tuple[Tuple[Any, ...], ...]
    boundary: Tuple[Tuple[Tuple[Incidence, ...], ...], ...]
    rep: MonodromyRep
    model: str = CUBICAL_MODEL
    axes: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if len(self.boundary) != len(self.cells):
            raise InvalidComplex("one boundary list per cell dimension is required")
        for k in range(1, len(self.cells)):
            for incidences in self.boundary[k]:
                for inc in incidences:
                    if not 0 <= inc.face < len(self.cells[k - 1]):
                        raise InvalidComplex(f"incidence on missing {k - 1}-cell {inc.face}")
        for k in range(len(self.cells) - 2):
            composite = self.coboundary(k + 1) * self.coboundary(k) if self.rep.exact else None
            if composite is not None and any(x != 0 for x in composite):
                raise InvalidComplex(f"coboundaries {k} and {k + 1} do not compose to zero")
            if composite is None:
                residual = self.coboundary_float(k + 1) @ self.coboundary_float(k)
                if residual.size and np.max(np.abs(residual)) > 1e-9:
                    raise InvalidComplex(f"coboundaries {k} and {k + 1} do not compose to zero")

    @property
    def top(self) -> int:
        return len(self.cells) - 1

    @property
    def rank(self) -> int:
        return self.rep.dim

    def count(self, k: int) -> int:
        return len(self.cells[k]) if 0 <= k <= self.top else 0

    def coboundary(self, k: int, lattice: bool = False) -> Matrix:
        """
        Exact matrix of delta^k : C^k -> C^{k+1}, blocks of size rank x rank.

        With ``lattice`` the transitions are written in lattice coordinates.
        """
        r = self.rank
        out = zeros(self.count(k + 1) * r, self.count(k) * r)
        if k < 0 or k >= self.top:
            return out
        ident = eye(r)
        for i, incidences in enumerate(self.boundary[k + 1]):
            for inc in incidences:
                block = ident if inc.transition is None else Matrix(inc.transition)
                if lattice and inc.transition is not None:
                    block = Matrix(lattice_coordinates(block, self.rep.lattice))
                rows, cols = slice(i * r, (i + 1) * r), slice(inc.face * r, (inc.face + 1) * r)
                out[rows, cols] = out[rows, cols] + inc.sign * block
        return out

    def coboundary_float(self, k: int) -> np.ndarray:
        r = self.rank
        out = np.zeros((self.count(k + 1) * r, self.count(k) * r))
        if k < 0 or k >= self.top:
            return out
        for i, incidences in enumerate(self.boundary[k + 1]):
            for inc in incidences:
                block = np.eye(r) if inc.transition is None else to_float(inc.transition)
                out[i * r:(i + 1) * r, inc.face * r:(inc.face + 1) * r] += inc.sign * block
        return out


@dataclass(frozen=True)
class TwistedCochain:
    degree: int
    values: np.ndarray  # (cells, rank)


@dataclass(frozen=True)
class CohomologyGroup:
    """Rank, torsion and a representative basis of H^k."""

    degree: int
    ring: str
    rank: int
    torsion: Tuple[int, ...] = ()
    basis: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {"degree": self.degree, "ring": self.ring, "rank": self.rank, "torsion": list(self.torsion)}


# Construction

def koszul_complex(rep: MonodromyRep, labels: Optional[Sequence[Any]] = None, axes: Optional[Sequence[int]] = None) -> TwistedCellComplex:
    """
    Cubical complex of the torus whose fundamental group is the free abelian
    group of ``rep``; the k-cells are the k-subsets of the generators.

    Raises:
        InvalidComplex: if the generator images do not commute
    """
    m = rep.presentation.rank
    labels = list(labels) if labels is not None else list(rep.presentation.generators)
    cells: List[Tuple[Any, ...]] = []
    boundary: List[Tuple[Tuple[Incidence, ...], ...]] = []
    index_of: List[Dict[Tuple[int, ...], int]] = []
    for k in range(m + 1):
        subsets = list(itertools.combinations(range(m), k))
        index_of.append({s: i for i, s in enumerate(subsets)})
        cells.append(tuple("".join(str(labels[g]) for g in s) or "pt" for s in subsets))
        rows = []
        for s in subsets:
            incidences = []
            for j, g in enumerate(s):
                face = index_of[k - 1][s[:j] + s[j + 1:]]
                sign = -1 if j % 2 else 1
                incidences.append(Incidence(face, sign, ImmutableMatrix(rep.images[g])))
                incidences.append(Incidence(face, -sign, None))
            rows.append(tuple(incidences))
        boundary.append(tuple(rows))
    return TwistedCellComplex(tuple(cells), tuple(boundary), rep, CUBICAL_MODEL, tuple(axes) if axes is not None else None)


def circle_complex(rep: MonodromyRep) -> TwistedCellComplex:
    """One vertex, one edge: H^0 = ker(rho - 1), H^1 = coker(rho - 1)."""
    if rep.presentation.rank != 1:
        raise InvalidComplex("a circle complex needs a one-generator representation")
    return koszul_complex(rep)


def torus_complex(rep: MonodromyRep) -> TwistedCellComplex:
    """Standard cubical torus (1, k, binom(k, 2), ... cells) of a free abelian representation."""
    return koszul_complex(rep)


def grid_rep(grid: SpacetimeGrid, target: ScalarTarget) -> Tuple[MonodromyRep, Tuple[int, ...]]:
    """
    The local system pulled back along the scalar map: one generator per
    periodic spacetime direction with image rho(winding).
    """
    axes = tuple(ax for ax in range(NDIM) if grid.periodic[ax])
    names = [AXIS_NAMES[ax] for ax in axes]
    presentation = GroupPresentation.free_abelian(len(axes), names)
    images = [transport(target.monodromy, grid.winding(ax)) for ax in axes]
    rep = MonodromyRep.build(presentation, target.sp, images, target.monodromy.lattice)
    return rep, axes


def grid_complex(grid: SpacetimeGrid, target: ScalarTarget) -> TwistedCellComplex:
    """Quotient of the grid along its cuts, collapsed to the cubical torus cells."""
    rep, axes = grid_rep(grid, target)
    complex_ = koszul_complex(rep, [AXIS_NAMES[ax] for ax in axes], axes)
    logger.debug(f"grid complex over directions {axes}: cells {[len(c) for c in complex_.cells]}")
    return complex_


def euler_characteristic(complex_: TwistedCellComplex) -> int:
    return sum((-1) ** k * complex_.count(k) for k in range(complex_.top + 1))


# Cohomology

def _numerical_rank(m: np.ndarray, tol: float) -> int:
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def _harmonic_basis(before: np.ndarray, after: np.ndarray, size: int, tol: float) -> np.ndarray:
    """Null space of [delta^k; (delta^{k-1})^T]: harmonic representatives as rows."""
    stacked = np.vstack([after.reshape(-1, size), before.T.reshape(-1, size)])
    if stacked.shape[0] == 0:
        return np.eye(size)
    _, s, vt = np.linalg.svd(stacked)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    return vt[rank:]


def _lattice_coboundary(complex_: TwistedCellComplex, k: int) -> Matrix:
    """
    Integer coboundary in lattice coordinates.

    Raises:
        LatticeNotPreserved
    """
    if complex_.rep.lattice is None or not complex_.rep.exact:
        raise LatticeNotPreserved("integer cohomology needs an exact representation with a lattice")
    for img in complex_.rep.images:
        if not preserves(img, complex_.rep.lattice):
            raise LatticeNotPreserved("monodromy does not preserve the lattice")
    try:
        return as_integer_matrix(complex_.coboundary(k, lattice=True), f"coboundary {k}")
    except NotIntegral as e:
        raise LatticeNotPreserved(str(e)) from e


def _smith(m: Matrix) -> Tuple[Matrix, Matrix, List[int]]:
    """(U, W, nonzero divisors) with U m W diagonal; handles empty matrices."""
    rows, cols = m.shape
    if rows == 0 or cols == 0:
        return eye(rows), eye(cols), []
    d, u, w = smith_normal_form(m)
    return u, w, [int(d[i, i]) for i in range(min(rows, cols)) if d[i, i] != 0]


def twisted_cohomology(
    complex_: TwistedCellComplex,
    k: int,
    ring: str = "real",
    rank_tol: float = DEFAULT_TOLERANCES["rank_tol"],
) -> CohomologyGroup:
    """
    H^k of the complex over the reals or the lattice.

    Raises:
        InvalidComplex: unknown ring or degree
        LatticeNotPreserved: integer case without a preserved lattice
    """
    if not 0 <= k <= complex_.top:
        raise InvalidComplex(f"no cells of dimension {k}")
    size = complex_.count(k) * complex_.rank
    if ring == "real":
        after = complex_.coboundary_float(k)
        before = complex_.coboundary_float(k - 1)
        rank = size - _numerical_rank(after, rank_tol) - _numerical_rank(before, rank_tol)
        basis = _harmonic_basis(before, after, size, rank_tol)
        logger.debug(f"H^{k} over R: rank {rank}")
        return CohomologyGroup(k, ring, rank, (), basis)
    if ring == "integer":
        after = _lattice_coboundary(complex_, k)
        before = _lattice_coboundary(complex_, k - 1)
        _, _, divisors = _smith(before)
        rank = size - after.rank() - len(divisors)
        torsion = tuple(d for d in divisors if d > 1)
        logger.debug(f"H^{k} over Z: rank {rank}, torsion {torsion}")
        basis = integral_image_basis(complex_, k).basis
        return CohomologyGroup(k, ring, rank, torsion, basis)
    raise InvalidComplex(f"unknown coefficient ring {ring!r}")


@dataclass(frozen=True)
class IntegralImage:
    """
    The image of integer cohomology in real cohomology.

    Coordinates on H^k are y_tail = (U c)[offset:], where U is the left Smith
    transform of the previous coboundary; ``basis`` rows span the image.
    """

    degree: int
    u: Matrix = field(repr=False)
    offset: int
    basis: np.ndarray

    def coordinates(self, cochain_lattice: np.ndarray) -> np.ndarray:
        y = to_float(self.u) @ cochain_lattice.reshape(-1) if self.u.rows else np.zeros(0)
        return y[self.offset:]

    def to_dict(self) -> Dict[str, Any]:
        return {"degree": self.degree, "offset": self.offset, "basis": self.basis.tolist()}


def integral_image_basis(complex_: TwistedCellComplex, k: int) -> IntegralImage:
    """
    Basis of j_*(H^k(M; Lambda)) inside H^k(M; R); torsion maps to zero.

    Raises:
        LatticeNotPreserved
    """
    before = _lattice_coboundary(complex_, k - 1)
    after = _lattice_coboundary(complex_, k)
    size = complex_.count(k) * complex_.rank
    u, _, divisors = _smith(before)
    offset = len(divisors)
    cocycles = eye(size) if after.rows == 0 else integer_kernel(after)
    if size == 0 or cocycles.cols == 0:
        return IntegralImage(k, u, offset, np.zeros((0, size - offset)))
    tail = (u * cocycles)[offset:, :]
    if tail.rows == 0:
        return IntegralImage(k, u, offset, np.zeros((0, 0)))
    hnf = row_hermite_normal_form(tail.T)
    return IntegralImage(k, u, offset, to_float(hnf) if hnf.rows else np.zeros((0, size - offset)))


# Quantization

class QuantizationKind(str, Enum):
    INTEGRAL = "Integral"
    NON_INTEGRAL = "NonIntegral"
    NOT_CLOSED = "NotClosed"


@dataclass
class QuantizationVerdict:
    kind: QuantizationKind
    coefficients: List[int]
    residual: float
    closedness: float
    cochain: TwistedCochain = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.kind == QuantizationKind.INTEGRAL

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.kind.value,
            "coefficients": self.coefficients,
            "residual": self.residual,
            "closedness": self.closedness,
            "cochain": self.cochain.values.tolist(),
        }


def _closing(values: np.ndarray, transition: Optional[np.ndarray]) -> np.ndarray:
    return values if transition is None else np.einsum("ab,...b->...a", transition, values)


def integrate_two_cell(v: TwistedTwoForm, mu: int, nu: int) -> np.ndarray:
    """
    Trapezoid integral of V_{mu nu} over the coordinate square through the
    grid origin, closing each periodic layer with the cut transition.
    """
    grid = v.grid
    index = [0] * NDIM
    index[mu] = slice(None)
    index[nu] = slice(None)
    f = v.v[tuple(index)][..., mu, nu]  # (N_mu, N_nu, rank)
    t_mu, t_nu = v.transitions[mu], v.transitions[nu]
    n_mu, n_nu = f.shape[:2]
    ext = np.zeros((n_mu + 1, n_nu + 1, f.shape[-1]))
    ext[:n_mu, :n_nu] = f
    ext[n_mu, :n_nu] = _closing(f[0, :], t_mu)
    ext[:n_mu, n_nu] = _closing(f[:, 0], t_nu)
    ext[n_mu, n_nu] = _closing(_closing(f[0, 0], t_nu), t_mu)
    w_mu = np.full(n_mu + 1, grid.spacing[mu])
    w_nu = np.full(n_nu + 1, grid.spacing[nu])
    w_mu[[0, -1]] *= 0.5
    w_nu[[0, -1]] *= 0.5
    return np.einsum("i,j,ija->a", w_mu, w_nu, ext)


def integrate_cochain(v: TwistedTwoForm, complex_: TwistedCellComplex) -> TwistedCochain:
    """
    Raises:
        ComplexMismatch: complex not built from the same grid and cuts
    """
    axes = complex_.axes
    periodic = tuple(ax for ax in range(NDIM) if v.grid.periodic[ax])
    if axes is None or tuple(axes) != periodic:
        raise ComplexMismatch(f"complex directions {axes} do not match periodic directions {periodic}")
    if complex_.rank != v.rank:
        raise ComplexMismatch(f"complex rank {complex_.rank} differs from fiber rank {v.rank}")
    for g, ax in enumerate(axes):
        expected = to_float(complex_.rep.images[g])
        actual = v.transitions[ax] if v.transitions[ax] is not None else np.eye(v.rank)
        if np.max(np.abs(expected - actual)) > 1e-12:
            raise ComplexMismatch(f"transition across direction {ax} differs from the complex")
    values = np.zeros((complex_.count(2), v.rank))
    for i, pair in enumerate(itertools.combinations(range(len(axes)), 2)):
        values[i] = integrate_two_cell(v, axes[pair[0]], axes[pair[1]])
    return TwistedCochain(2, values)


def quantization_check(v: TwistedTwoForm, complex_: TwistedCellComplex, tol: float = DEFAULT_TOLERANCES["quantization_tol"]) -> QuantizationVerdict:
    """
    Test whether the twisted class of V lies in the integral image.

    The integrated 2-cochain is rewritten in lattice coordinates, checked for
    closedness and decomposed along the integral image basis; the verdict
    rounds the coefficients and reports the distance to the lattice point.

    Raises:
        ComplexMismatch
        LatticeNotPreserved
    """
    cochain = integrate_cochain(v, complex_)
    closedness = 0.0
    delta = complex_.coboundary_float(2)
    if delta.size:
        closedness = float(np.max(np.abs(delta @ cochain.values.reshape(-1))))
    if closedness > tol:
        logger.warning(f"field strength cochain is not closed (defect {closedness:.3e})")
        return QuantizationVerdict(QuantizationKind.NOT_CLOSED, [], float("nan"), closedness, cochain)

    image = integral_image_basis(complex_, 2)
    b_inv = np.linalg.inv(to_float(complex_.rep.lattice.basis))
    in_lattice = np.einsum("ab,cb->ca", b_inv, cochain.values)
    y = image.coordinates(in_lattice)
    if image.basis.shape[0] == 0:
        residual = float(np.max(np.abs(y), initial=0.0))
        coefficients: List[int] = []
    else:
        x, *_ = np.linalg.lstsq(image.basis.T, y, rcond=None)
        rounded = np.rint(x)
        residual = float(max(
            np.max(np.abs(x - rounded), initial=0.0),
            np.max(np.abs(image.basis.T @ rounded - y), initial=0.0),
        ))
        coefficients = [int(c) for c in rounded]
    kind = QuantizationKind.INTEGRAL if residual <= tol else QuantizationKind.NON_INTEGRAL
    logger.debug(f"quantization: coefficients {coefficients}, residual {residual:.3e}")
    return QuantizationVerdict(kind, coefficients, residual, closedness, cochain)


# Symplectic torus fibers

def torus_transport(rep: MonodromyRep, lat: IntegralLattice, j: Any, w: Word, tol: float = 1e-9) -> Dict[str, Any]:
    """
    Transport of the torus fiber data (Lambda, omega, J) along a loop.

    The lattice and omega are carried to themselves; J generally is not.
    """
    t = transport(rep, w)
    jf = to_float(j)
    tf = to_float(t)
    moved = tf @ jf @ np.linalg.inv(tf)
    return {
        "word": w.format(rep.presentation.generators),
        "lattice_preserved": bool(preserves(t, lat)),
        "omega_preserved": bool(is_symplectic(t, rep.sp)),
        "complex_structure_preserved": bool(np.max(np.abs(moved - jf)) <= tol),
    }
