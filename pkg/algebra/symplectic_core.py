"""
Exact linear-algebraic layer: symplectic spaces, tamings, integral lattices,
lattice types and the classical group membership tests.

Conventions: the standard pairing is omega = [[0, I], [-I, 0]]; a matrix m is
symplectic when m^T omega m = omega; the Euclidean form of a taming J is the
matrix Q = omega J (so Q(x, y) = omega(Jx, y) with omega(u, v) = v^T omega u);
the Gram matrix of a lattice with basis B is B^T omega B.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np
from sympy import ImmutableMatrix, Matrix, Rational, eye, zeros

from algebra.integer_forms import (
    as_integer_matrix,
    frobenius_reduction,
    is_unimodular,
    same_lattice,
)
from utils.errors import (
    DegenerateLattice,
    DimensionError,
    NotAlmostComplex,
    NotCompatible,
    NotIntegral,
    NotPositive,
)

logger = logging.getLogger("esm.algebra.symplectic")

DEFAULT_TOLERANCES: Dict[str, float] = {
    "alg_tol": 1e-12,
    "field_tol": 1e-8,
    "rank_tol": 1e-9,
    "covariance_tol": 1e-9,
    "quantization_tol": 1e-6,
}


def exact_matrix(m: Any) -> Optional[ImmutableMatrix]:
    """
    Return m as an exact rational sympy matrix, or None if it holds floats.

    Integer numpy arrays, nested lists of ints/"p/q" strings and sympy
    matrices with rational entries are exact; anything carrying a float is not.
    """
    if isinstance(m, np.ndarray):
        if m.dtype.kind not in "iub":
            return None
        return ImmutableMatrix(m.astype(object).tolist())
    try:
        mat = Matrix(m)
    except (TypeError, ValueError):
        return None
    if all(entry.is_Rational for entry in mat):
        return ImmutableMatrix(mat)
    return None


def to_float(m: Any) -> np.ndarray:
    """Numeric copy of any matrix-like input."""
    if isinstance(m, np.ndarray):
        return m.astype(float)
    return np.array(Matrix(m).tolist(), dtype=float)


def standard_omega(n: int) -> ImmutableMatrix:
    """Block form [[0, I], [-I, 0]] of size 2n."""
    out = zeros(2 * n, 2 * n)
    for i in range(n):
        out[i, n + i] = 1
        out[n + i, i] = -1
    return ImmutableMatrix(out)


def standard_complex_structure(n: int) -> ImmutableMatrix:
    """J_0 = [[0, -I], [I, 0]], the taming with Q = identity for the standard form."""
    return ImmutableMatrix(-standard_omega(n))


@dataclass(frozen=True)
class SymplecticSpace:
    """A symplectic vector space given by its pairing matrix in a chosen basis."""

    omega: ImmutableMatrix

    def __post_init__(self):
        omega = exact_matrix(self.omega)
        if omega is None:
            raise DimensionError("symplectic form must have exact rational entries")
        if not omega.is_square or omega.shape[0] == 0 or omega.shape[0] % 2:
            raise DimensionError(f"symplectic form must be square of even size, got {omega.shape}")
        if omega.T != -omega:
            raise DimensionError("symplectic form is not antisymmetric")
        if omega.det() == 0:
            raise DegenerateLattice("symplectic form is degenerate")
        object.__setattr__(self, "omega", omega)

    @classmethod
    def standard(cls, n: int) -> "SymplecticSpace":
        return cls(standard_omega(n))

    @property
    def dim(self) -> int:
        return self.omega.shape[0]

    @property
    def n(self) -> int:
        return self.dim // 2

    @property
    def omega_float(self) -> np.ndarray:
        return to_float(self.omega)

    def check_shape(self, m: Any, what: str = "matrix") -> None:
        shape = np.shape(m) if isinstance(m, np.ndarray) else Matrix(m).shape
        if tuple(shape) != (self.dim, self.dim):
            raise DimensionError(f"{what} has shape {tuple(shape)}, expected {(self.dim, self.dim)}")


@dataclass(frozen=True)
class Taming:
    """A taming J together with its Euclidean form Q = omega J."""

    j: np.ndarray
    q: np.ndarray

    def hermitian_form(self, sp: SymplecticSpace) -> np.ndarray:
        """h = Q + i*omega as a complex matrix in the real basis."""
        return self.q + 1j * sp.omega_float


@dataclass(frozen=True)
class IntegralLattice:
    """Full lattice spanned by the columns of ``basis``, with its cached type."""

    basis: ImmutableMatrix
    type_divisors: Tuple[int, ...] = field(default=())

    @classmethod
    def from_basis(cls, basis: Any, sp: SymplecticSpace) -> "IntegralLattice":
        mat = ImmutableMatrix(as_integer_matrix(basis, "lattice basis"))
        sp.check_shape(mat, "lattice basis")
        if mat.det() == 0:
            raise DegenerateLattice("lattice basis is not full rank")
        divisors = lattice_type(mat, sp)
        return cls(mat, tuple(divisors))

    @classmethod
    def standard(cls, sp: SymplecticSpace) -> "IntegralLattice":
        return cls.from_basis(eye(sp.dim), sp)


@dataclass(frozen=True)
class EsmParameters:
    """Coupling constant and named tolerances."""

    kappa: float = 1.0
    tolerances: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        merged = dict(DEFAULT_TOLERANCES)
        merged.update({k: float(v) for k, v in dict(self.tolerances).items()})
        for name, value in merged.items():
            if not value > 0:
                raise ValueError(f"tolerance {name} must be positive, got {value}")
        object.__setattr__(self, "tolerances", merged)

    def tol(self, name: str) -> float:
        return self.tolerances[name]

    def with_overrides(self, kappa: Optional[float] = None, **tolerances: float) -> "EsmParameters":
        unknown = set(tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ValueError(f"unknown tolerance(s): {sorted(unknown)}")
        merged = dict(self.tolerances)
        merged.update(tolerances)
        return EsmParameters(self.kappa if kappa is None else kappa, merged)


def is_symplectic(m: Any, sp: SymplecticSpace, tol: float = DEFAULT_TOLERANCES["alg_tol"]) -> bool:
    """
    Test m^T omega m = omega.

    Exact for rational input; ``tol`` bounds the max-norm defect for floats.

    Raises:
        DimensionError: if m does not match the space
    """
    sp.check_shape(m)
    exact = exact_matrix(m)
    if exact is not None:
        return exact.T * sp.omega * exact == sp.omega
    mf = to_float(m)
    omega = sp.omega_float
    return bool(np.max(np.abs(mf.T @ omega @ mf - omega)) <= tol)


def validate_taming(j: Any, sp: SymplecticSpace, tol: float = DEFAULT_TOLERANCES["alg_tol"]) -> Taming:
    """
    Validate a taming and derive its Euclidean form.

    Args:
        j: Candidate complex structure
        sp: Symplectic space
        tol: Absolute tolerance for float input

    Returns:
        Taming with q = omega J

    Raises:
        NotAlmostComplex, NotCompatible, NotPositive, DimensionError
    """
    sp.check_shape(j, "taming")
    exact = exact_matrix(j)
    if exact is not None:
        if exact * exact != -eye(sp.dim):
            raise NotAlmostComplex("J^2 != -I")
        if exact.T * sp.omega * exact != sp.omega:
            raise NotCompatible("omega(J., J.) != omega")
        jf = to_float(exact)
    else:
        jf = to_float(j)
        scale = max(1.0, float(np.max(np.abs(jf))) ** 2)
        if np.max(np.abs(jf @ jf + np.eye(sp.dim))) > tol * scale:
            raise NotAlmostComplex("J^2 != -I")
        omega = sp.omega_float
        if np.max(np.abs(jf.T @ omega @ jf - omega)) > tol * scale:
            raise NotCompatible("omega(J., J.) != omega")

    q = sp.omega_float @ jf
    q = 0.5 * (q + q.T)
    min_eig = float(np.linalg.eigvalsh(q).min())
    if min_eig <= 0:
        raise NotPositive(f"Q = omega J is not positive definite (min eigenvalue {min_eig:.3e})")
    return Taming(jf, q)


def taming_from_frame(e: Any, sp: SymplecticSpace) -> ImmutableMatrix:
    """J = E J_0 E^-1 for a symplectic frame E (exact when E is)."""
    if sp.omega != standard_omega(sp.n):
        raise DimensionError("frame tamings are defined relative to the standard form")
    mat = Matrix(e)
    return ImmutableMatrix(mat * standard_complex_structure(sp.n) * mat.inv())


def gram_matrix(basis: Any, sp: SymplecticSpace) -> ImmutableMatrix:
    """B^T omega B."""
    b = Matrix(basis)
    return ImmutableMatrix(b.T * sp.omega * b)


def lattice_type(lat: Any, sp: SymplecticSpace) -> Tuple[int, ...]:
    """
    Elementary-divisor type (t_1 | ... | t_n) of an integral lattice.

    Args:
        lat: IntegralLattice or basis matrix

    Raises:
        NotIntegral: if the Gram matrix has a non-integer entry
        DegenerateLattice: if it is singular
    """
    basis = lat.basis if isinstance(lat, IntegralLattice) else lat
    sp.check_shape(basis, "lattice basis")
    gram = gram_matrix(basis, sp)
    for entry in gram:
        if not Rational(entry).is_integer:
            raise NotIntegral(f"Gram matrix entry {entry} is not an integer")
    if gram.det() == 0:
        raise DegenerateLattice("Gram matrix is singular")
    _, divisors = frobenius_reduction(gram)
    return tuple(divisors)


def is_integral_symplectic_space(basis: Any, sp: SymplecticSpace) -> bool:
    """True iff the lattice is full and pairs integrally."""
    try:
        lattice_type(basis, sp)
    except (NotIntegral, DegenerateLattice):
        return False
    return True


def siegel_membership(m: Any, lat: IntegralLattice, sp: SymplecticSpace) -> bool:
    """
    Membership in the modified Siegel modular group of the lattice.

    True iff m is symplectic and m(Lambda) = Lambda, tested by comparing the
    Hermite normal forms of B and m B.

    Raises:
        DimensionError
    """
    sp.check_shape(m)
    exact = exact_matrix(m)
    if exact is None:
        raise DimensionError("lattice membership requires exact matrix entries")
    if not is_symplectic(exact, sp):
        return False
    image = exact * lat.basis
    if any(not entry.is_integer for entry in image):
        return False
    return same_lattice(lat.basis, image)


def lattice_coordinates(m: Any, lat: IntegralLattice) -> ImmutableMatrix:
    """B^-1 m B, the matrix of m in lattice coordinates."""
    b = Matrix(lat.basis)
    return ImmutableMatrix(b.inv() * Matrix(m) * b)


def preserves(m: Any, lat: IntegralLattice) -> bool:
    """True iff m maps the lattice onto itself (integral and unimodular in its basis)."""
    exact = exact_matrix(m)
    if exact is None:
        return False
    return is_unimodular(lattice_coordinates(exact, lat))
