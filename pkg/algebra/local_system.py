"""
Duality structures as monodromy representations of finitely presented groups.

A flat symplectic bundle is encoded by a presentation of the fundamental
group at a basepoint together with one symplectic matrix per generator.
Transport along a word is the ordered product of generator images.
"""

import itertools
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from sympy import ImmutableMatrix, Matrix, Rational, eye, sqrt, symbols, zeros

from algebra.symplectic_core import (
    DEFAULT_TOLERANCES,
    IntegralLattice,
    SymplecticSpace,
    exact_matrix,
    is_symplectic,
    lattice_coordinates,
    preserves,
    to_float,
)
from utils.errors import (
    DimensionError,
    LatticeNotPreserved,
    ParseError,
    PresentationMismatch,
    RelationViolation,
    SizeLimit,
)

logger = logging.getLogger("esm.algebra.local_system")

Letter = Tuple[int, int]

# Coefficients tried, in order, when searching an intertwiner space.
SWEEP_COEFFICIENTS = (
    Rational(0), Rational(1), Rational(-1), Rational(2), Rational(-2),
    Rational(1, 2), Rational(-1, 2),
)
SWEEP_LIMIT = 50000


@dataclass(frozen=True)
class Word:
    """A word in the generators: a sequence of (generator index, +1 or -1)."""

    letters: Tuple[Letter, ...] = ()

    @classmethod
    def empty(cls) -> "Word":
        return cls(())

    @classmethod
    def generator(cls, index: int, exponent: int = 1) -> "Word":
        return cls(((index, 1 if exponent > 0 else -1),) * abs(exponent))

    @classmethod
    def parse(cls, text: Any, generators: Sequence[str], location: str = "word") -> "Word":
        """
        Parse "a b A B", "a b a^-1 b^-1", "a^2" or a list of [index, exponent].

        Upper-case tokens invert a lower-case generator of the same name.
        """
        if isinstance(text, Word):
            return text
        if isinstance(text, (list, tuple)):
            letters = []
            for item in text:
                if isinstance(item, str):
                    letters.extend(cls.parse(item, generators, location).letters)
                    continue
                index, exponent = int(item[0]), int(item[1])
                if not 0 <= index < len(generators) or exponent == 0:
                    raise ParseError(f"invalid letter {item!r}", location)
                letters.extend([(index, 1 if exponent > 0 else -1)] * abs(exponent))
            return cls(tuple(letters))
        text = str(text).strip()
        if text in ("", "1", "e"):
            return cls.empty()
        letters: List[Letter] = []
        for token in text.replace("*", " ").split():
            name, _, power = token.partition("^")
            exponent = int(power.strip("{}")) if power else 1
            if name in generators:
                index = generators.index(name)
            elif name.isupper() and name.lower() in generators:
                index = generators.index(name.lower())
                exponent = -exponent
            else:
                raise ParseError(f"unknown generator {name!r}", location)
            if exponent == 0:
                continue
            letters.extend([(index, 1 if exponent > 0 else -1)] * abs(exponent))
        return cls(tuple(letters))

    def reduce(self) -> "Word":
        stack: List[Letter] = []
        for letter in self.letters:
            if stack and stack[-1][0] == letter[0] and stack[-1][1] == -letter[1]:
                stack.pop()
            else:
                stack.append(letter)
        return Word(tuple(stack))

    def inverse(self) -> "Word":
        return Word(tuple((g, -e) for g, e in reversed(self.letters)))

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def __len__(self) -> int:
        return len(self.letters)

    def max_index(self) -> int:
        return max((g for g, _ in self.letters), default=-1)

    def format(self, generators: Sequence[str]) -> str:
        if not self.letters:
            return "1"
        return " ".join(generators[g] if e > 0 else f"{generators[g]}^-1" for g, e in self.letters)


@dataclass(frozen=True)
class GroupPresentation:
    """Finite presentation of the fundamental group at a basepoint."""

    generators: Tuple[str, ...]
    relations: Tuple[Word, ...] = ()

    def __post_init__(self):
        if len(set(self.generators)) != len(self.generators):
            raise ParseError(f"duplicate generator names in {self.generators}")
        for rel in self.relations:
            if rel.max_index() >= len(self.generators):
                raise ParseError(f"relation references undeclared generator: {rel}")

    @classmethod
    def build(cls, generators: Sequence[str], relations: Sequence[Any] = ()) -> "GroupPresentation":
        gens = tuple(str(g) for g in generators)
        rels = tuple(Word.parse(r, gens, f"presentation.relations[{i}]") for i, r in enumerate(relations))
        return cls(gens, rels)

    @classmethod
    def free(cls, k: int, names: Optional[Sequence[str]] = None) -> "GroupPresentation":
        names = tuple(names) if names else _default_names(k)
        return cls(names, ())

    @classmethod
    def free_abelian(cls, k: int, names: Optional[Sequence[str]] = None) -> "GroupPresentation":
        """Z^k: one generator per direction with all commutators as relations."""
        names = tuple(names) if names else _default_names(k)
        rels = []
        for i in range(k):
            for j in range(i + 1, k):
                rels.append(Word(((i, 1), (j, 1), (i, -1), (j, -1))))
        return cls(names, tuple(rels))

    @property
    def rank(self) -> int:
        return len(self.generators)

    def word(self, text: Any) -> Word:
        return Word.parse(text, self.generators)


def _default_names(k: int) -> Tuple[str, ...]:
    letters = "abcdefgh"
    if k <= len(letters):
        return tuple(letters[:k])
    return tuple(f"g{i}" for i in range(k))


def reduced_words(rank: int, max_len: int) -> Iterator[Word]:
    """All reduced words of length <= max_len in shortlex order."""
    alphabet = [(g, e) for g in range(rank) for e in (1, -1)]
    layer = [Word.empty()]
    yield Word.empty()
    for _ in range(max_len):
        nxt = []
        for w in layer:
            last = w.letters[-1] if w.letters else None
            for letter in alphabet:
                if last is not None and last[0] == letter[0] and last[1] == -letter[1]:
                    continue
                nw = Word(w.letters + (letter,))
                nxt.append(nw)
                yield nw
        layer = nxt


@dataclass(frozen=True)
class MonodromyRep:
    """Generator images of a symplectic representation, optionally with a lattice."""

    presentation: GroupPresentation
    sp: SymplecticSpace
    images: Tuple[ImmutableMatrix, ...]
    lattice: Optional[IntegralLattice] = None
    exact: bool = True
    tol: float = DEFAULT_TOLERANCES["alg_tol"]

    @classmethod
    def build(
        cls,
        presentation: GroupPresentation,
        sp: SymplecticSpace,
        images: Any,
        lattice: Optional[IntegralLattice] = None,
        tol: float = DEFAULT_TOLERANCES["alg_tol"],
    ) -> "MonodromyRep":
        """
        Validate and assemble a representation.

        Args:
            images: Mapping generator name -> matrix, or a sequence in generator order

        Raises:
            DimensionError: an image is not symplectic or has the wrong size
            RelationViolation: a relation does not evaluate to the identity
            LatticeNotPreserved: a generator does not preserve the lattice
        """
        if isinstance(images, Mapping):
            missing = [g for g in presentation.generators if g not in images]
            if missing:
                raise ParseError(f"missing monodromy images for {missing}", "monodromy")
            ordered = [images[g] for g in presentation.generators]
        else:
            ordered = list(images)
        if len(ordered) != presentation.rank:
            raise DimensionError(f"{len(ordered)} images for {presentation.rank} generators")

        converted = []
        exact = True
        for name, m in zip(presentation.generators, ordered):
            sp.check_shape(m, f"monodromy image {name}")
            em = exact_matrix(m)
            if em is None:
                exact = False
                em = ImmutableMatrix(to_float(m).tolist())
            if not is_symplectic(em if exact else to_float(m), sp, tol):
                raise DimensionError(f"monodromy image {name} is not symplectic")
            converted.append(em)

        rep = cls(presentation, sp, tuple(converted), lattice, exact, tol)
        for i, rel in enumerate(presentation.relations):
            if not rep.is_identity(transport(rep, rel)):
                raise RelationViolation(f"relation {rel.format(presentation.generators)} is not trivial",
                                        {"relation": i})
        if lattice is not None and not preserves_lattice(rep, lattice):
            raise LatticeNotPreserved("a generator image does not preserve the lattice")
        return rep

    @classmethod
    def trivial(cls, presentation: GroupPresentation, sp: SymplecticSpace) -> "MonodromyRep":
        return cls.build(presentation, sp, [eye(sp.dim)] * presentation.rank)

    @property
    def dim(self) -> int:
        return self.sp.dim

    def image(self, index: int, exponent: int = 1) -> ImmutableMatrix:
        m = self.images[index]
        if exponent > 0:
            return m
        # symplectic inverse: omega^-1 m^T omega
        return ImmutableMatrix(self.sp.omega.inv() * m.T * self.sp.omega)

    def is_identity(self, m: Any) -> bool:
        return self.equal(m, eye(self.dim))

    def equal(self, a: Any, b: Any) -> bool:
        if self.exact:
            return Matrix(a) == Matrix(b)
        return bool(np.max(np.abs(to_float(a) - to_float(b))) <= self.tol)

    def float_images(self) -> List[np.ndarray]:
        return [to_float(m) for m in self.images]

    def with_images(self, images: Any) -> "MonodromyRep":
        return MonodromyRep.build(self.presentation, self.sp, images, self.lattice, self.tol)


def transport(rep: MonodromyRep, w: Word) -> ImmutableMatrix:
    """
    Parallel transport along a basepoint loop: the ordered product of images.

    Raises:
        DimensionError: if the word references an unknown generator
    """
    if w.max_index() >= rep.presentation.rank:
        raise DimensionError(f"word uses generator {w.max_index()} of {rep.presentation.rank}")
    out = eye(rep.dim)
    for g, e in w.letters:
        out = out * rep.image(g, e)
    return ImmutableMatrix(out)


def transports(rep: MonodromyRep, max_len: int) -> Iterator[Tuple[Word, ImmutableMatrix]]:
    """(word, transport) for all reduced words up to max_len, shortlex order."""
    cache: Dict[Tuple[Letter, ...], ImmutableMatrix] = {(): ImmutableMatrix(eye(rep.dim))}
    for w in reduced_words(rep.presentation.rank, max_len):
        if not w.letters:
            yield w, cache[()]
            continue
        prefix = cache[w.letters[:-1]]
        g, e = w.letters[-1]
        value = ImmutableMatrix(prefix * rep.image(g, e))
        cache[w.letters] = value
        yield w, value


def _float_key(m: Any, tol: float) -> Tuple[float, ...]:
    scale = max(tol, 1e-12)
    return tuple(np.round(to_float(m).ravel() / scale).astype(np.int64).tolist())


def holonomy_sample(rep: MonodromyRep, max_len: int, max_size: int = 10000) -> List[ImmutableMatrix]:
    """
    Distinct transports of reduced words of length <= max_len.

    Values appear in the order of the first word producing them (shortlex).

    Raises:
        SizeLimit: if more than max_size distinct matrices are found
        ValueError: if max_len is negative
    """
    if max_len < 0:
        raise ValueError("max_len must be nonnegative")
    seen: "OrderedDict[Any, ImmutableMatrix]" = OrderedDict()
    for _, value in transports(rep, max_len):
        key = value if rep.exact else _float_key(value, rep.tol)
        if key not in seen:
            seen[key] = value
            if len(seen) > max_size:
                raise SizeLimit(f"holonomy sample exceeds {max_size} elements", {"max_len": max_len})
    logger.debug(f"holonomy sample: {len(seen)} elements up to length {max_len}")
    return list(seen.values())


# Linear systems A X_i = Y_i A

def _intertwiner_system(left: Sequence[Any], right: Sequence[Any], size: int) -> Matrix:
    """Coefficient matrix of A*left_i - right_i*A = 0 in row-major unknowns of A."""
    rows = []
    for lm, rm in zip(left, right):
        lm, rm = Matrix(lm), Matrix(rm)
        for r in range(size):
            for c in range(size):
                coef = [0] * (size * size)
                for k in range(size):
                    coef[r * size + k] += lm[k, c]
                    coef[k * size + c] -= rm[r, k]
                rows.append(coef)
    if not rows:
        return zeros(0, size * size)
    return Matrix(rows)


def _solution_basis(system: Matrix, size: int, exact: bool, tol: float) -> List[ImmutableMatrix]:
    unknowns = size * size
    if system.rows == 0:
        vectors = [Matrix([1 if i == k else 0 for i in range(unknowns)]) for k in range(unknowns)]
    elif exact:
        vectors = system.nullspace()
    else:
        a = np.array(system.tolist(), dtype=float)
        _, s, vh = np.linalg.svd(a)
        rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
        vectors = [Matrix(v) for v in vh[rank:]]
    if not vectors:
        return []
    if exact:
        # canonical basis: nonzero rows of the reduced row echelon form
        stacked, _ = Matrix.hstack(*vectors).T.rref()
        vectors = [stacked.row(i).T for i in range(stacked.rows) if any(x != 0 for x in stacked.row(i))]
    return [ImmutableMatrix(Matrix(size, size, list(v))) for v in vectors]


@dataclass(frozen=True)
class Commutant:
    """
    Linear intertwiners {A : A rho(g) = rho'(g) A for every generator g}.

    With ``image`` unset rho' = rho and this is the commutant.
    """

    basis: Tuple[ImmutableMatrix, ...]
    rep: MonodromyRep = field(repr=False)
    image: Optional[MonodromyRep] = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def contains(self, m: Any) -> bool:
        image = self.rep if self.image is None else self.image
        for img, out in zip(self.rep.images, image.images):
            if not self.rep.equal(Matrix(m) * img, out * Matrix(m)):
                return False
        return True

    def combination(self, coefficients: Sequence[Any]) -> ImmutableMatrix:
        out = zeros(self.rep.dim, self.rep.dim)
        for c, b in zip(coefficients, self.basis):
            out += c * b
        return ImmutableMatrix(out)

    def symplectic_sample(self, height: int = 2, limit: int = 64) -> List[ImmutableMatrix]:
        """Symplectic elements found by the deterministic coefficient sweep."""
        found: List[ImmutableMatrix] = []
        for coeffs in _sweep(self.dimension, height):
            m = self.combination(coeffs)
            if m.det() != 0 and is_symplectic(m, self.rep.sp) and m not in found:
                found.append(m)
                if len(found) >= limit:
                    break
        return found


def commutant_basis(rep: MonodromyRep) -> Commutant:
    """Basis of the commutant algebra of the monodromy (the based automorphisms)."""
    system = _intertwiner_system(rep.images, rep.images, rep.dim)
    basis = _solution_basis(system, rep.dim, rep.exact, rep.tol)
    logger.debug(f"commutant dimension {len(basis)}")
    return Commutant(tuple(basis), rep)


def intertwiner_basis(r1: MonodromyRep, r2: MonodromyRep) -> Commutant:
    """
    Basis of the intertwiners A rho1(g) = rho2(g) A, i.e. A rho1 A^-1 = rho2.

    Raises:
        PresentationMismatch
    """
    if r1.presentation != r2.presentation or r1.sp != r2.sp:
        raise PresentationMismatch("representations have different presentations or fibers")
    system = _intertwiner_system(r1.images, r2.images, r1.dim)
    basis = _solution_basis(system, r1.dim, r1.exact and r2.exact, max(r1.tol, r2.tol))
    logger.debug(f"intertwiner dimension {len(basis)}")
    return Commutant(tuple(basis), r1, r2)


class VerdictKind(str, Enum):
    TRIVIAL = "Trivial"
    NONTRIVIAL = "Nontrivial"
    UNKNOWN = "Unknown"
    EQUIVALENT = "Equivalent"
    DISTINCT = "Distinct"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    witness: Dict[str, Any] = field(default_factory=dict)
    conjugator: Optional[Any] = None

    def __bool__(self) -> bool:
        return self.kind in (VerdictKind.TRIVIAL, VerdictKind.EQUIVALENT)


def is_trivializable(rep: MonodromyRep) -> Verdict:
    """
    Trivial iff every generator image is the identity.

    A conjugation A rho(g) A^-1 = I forces rho(g) = I, so the first
    non-identity generator is a complete witness of nontriviality.
    """
    gens = rep.presentation.generators
    for index, img in enumerate(rep.images):
        if not rep.is_identity(img):
            deviation = to_float(Matrix(img) - eye(rep.dim))
            witness = {
                "word": gens[index],
                "image": img,
                "trace": img.trace(),
                "trivial_trace": rep.dim,
                "deviation": float(np.max(np.abs(deviation))),
            }
            return Verdict(VerdictKind.NONTRIVIAL, witness)
    return Verdict(VerdictKind.TRIVIAL)


def _sweep(k: int, height: int) -> Iterator[Tuple[Rational, ...]]:
    coeffs = [c for c in SWEEP_COEFFICIENTS if abs(c.p) <= height and c.q <= height]
    count = 0
    for combo in itertools.product(coeffs, repeat=k):
        if all(c == 0 for c in combo):
            continue
        yield combo
        count += 1
        if count >= SWEEP_LIMIT:
            logger.debug("coefficient sweep limit reached")
            return


def _conformal_factor(a: Matrix, sp: SymplecticSpace):
    """c with a^T omega a = c omega, or None."""
    m = a.T * sp.omega * a
    i, j = next((i, j) for i in range(sp.dim) for j in range(sp.dim) if sp.omega[i, j] != 0)
    c = m[i, j] / sp.omega[i, j]
    return c if m == c * sp.omega else None


def _gauss_newton(basis: Sequence[ImmutableMatrix], sp: SymplecticSpace, tol: float) -> Optional[np.ndarray]:
    mats = [to_float(b) for b in basis]
    omega = sp.omega_float
    starts = [np.eye(len(mats))[i] for i in range(len(mats))] + [np.ones(len(mats))]
    for x in starts:
        x = x.astype(float)
        for _ in range(50):
            a = sum(c * m for c, m in zip(x, mats))
            residual = (a.T @ omega @ a - omega).ravel()
            if np.max(np.abs(residual)) < tol:
                if abs(np.linalg.det(a)) > tol:
                    return a
                break
            jac = np.stack([(m.T @ omega @ a + a.T @ omega @ m).ravel() for m in mats], axis=1)
            step, *_ = np.linalg.lstsq(jac, -residual, rcond=None)
            x = x + step
    return None


def reps_equivalent(r1: MonodromyRep, r2: MonodromyRep, max_word_len: int = 4, height: int = 2) -> Verdict:
    """
    Semi-decision procedure for conjugacy of two representations in Sp(2n, R).

    Returns:
        Distinct(witness) from a trace mismatch or a singular intertwiner
        space, Equivalent(conjugator) when a symplectic intertwiner is found,
        Inconclusive otherwise

    Raises:
        PresentationMismatch
    """
    if r1.presentation != r2.presentation or r1.sp != r2.sp:
        raise PresentationMismatch("representations have different presentations or fibers")
    exact = r1.exact and r2.exact
    tol = max(r1.tol, r2.tol)
    gens = r1.presentation.generators

    for (w, t1), (_, t2) in zip(transports(r1, max_word_len), transports(r2, max_word_len)):
        d = t1.trace() - t2.trace()
        if (exact and d != 0) or (not exact and abs(float(d)) > tol):
            return Verdict(VerdictKind.DISTINCT, {"word": w.format(gens), "traces": [t1.trace(), t2.trace()]})

    system = _intertwiner_system(r1.images, r2.images, r1.dim)
    basis = _solution_basis(system, r1.dim, exact, tol)
    if not basis:
        return Verdict(VerdictKind.DISTINCT, {"intertwiner_dimension": 0})

    if exact:
        xs = symbols(f"x0:{len(basis)}")
        generic = zeros(r1.dim, r1.dim)
        for x, b in zip(xs, basis):
            generic += x * b
        if generic.det().expand() == 0:
            return Verdict(VerdictKind.DISTINCT, {
                "intertwiner_dimension": len(basis),
                "generic_rank": generic.rank(),
                "reason": "every intertwiner is singular",
            })

        for coeffs in _sweep(len(basis), height):
            a = zeros(r1.dim, r1.dim)
            for c, b in zip(coeffs, basis):
                a += c * b
            if a.det() == 0:
                continue
            c = _conformal_factor(a, r1.sp)
            if c is not None and c > 0:
                root = sqrt(c)
                conj = a / root if root.is_Rational else to_float(a) / float(root)
                logger.debug(f"conjugator found with scale {c}")
                return Verdict(VerdictKind.EQUIVALENT, {"scale": c, "intertwiner": ImmutableMatrix(a)},
                               conjugator=ImmutableMatrix(conj) if root.is_Rational else conj)

    conj = _gauss_newton(basis, r1.sp, max(tol, 1e-10))
    if conj is not None:
        return Verdict(VerdictKind.EQUIVALENT, {"scale": 1.0, "method": "least_squares"}, conjugator=conj)
    logger.warning("representation equivalence is inconclusive")
    return Verdict(VerdictKind.INCONCLUSIVE, {"intertwiner_dimension": len(basis)})


def preserves_lattice(rep: MonodromyRep, lat: IntegralLattice) -> bool:
    """
    True iff every generator maps the lattice onto itself.

    Raises:
        DimensionError
    """
    rep.sp.check_shape(lat.basis, "lattice basis")
    if not rep.exact:
        return False
    return all(preserves(img, lat) for img in rep.images)


def transport_lattice(rep: MonodromyRep, lat: IntegralLattice, w: Word) -> IntegralLattice:
    """The lattice carried along a loop; its type never changes."""
    if not preserves_lattice(rep, lat):
        raise LatticeNotPreserved("transport does not preserve the lattice")
    moved = Matrix(transport(rep, w)) * Matrix(lat.basis)
    return IntegralLattice.from_basis(moved, rep.sp)


def is_unitary_holonomy(rep: MonodromyRep, j: Any) -> bool:
    """True iff every image commutes with J, i.e. holonomy lies in U(S, J, h)."""
    jf = to_float(j)
    tol = max(rep.tol, 1e-12) * max(1.0, float(np.max(np.abs(jf))))
    for img in rep.float_images():
        if np.max(np.abs(img @ jf - jf @ img)) > tol * max(1.0, float(np.max(np.abs(img)))):
            return False
    return True


def lattice_monodromy(rep: MonodromyRep, lat: IntegralLattice) -> List[ImmutableMatrix]:
    """Generator images written in lattice coordinates."""
    return [lattice_coordinates(img, lat) for img in rep.images]
