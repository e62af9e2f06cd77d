"""
Scalar-electromagnetic dualities acting on configurations.

A duality is an affine isometry f0(y) = A y + tau of the target chart together
with a constant symplectic lift F in the cut trivialization. Loops of the
target are carried to loops by A; F has to intertwine the monodromy along that
map (F rho_i F^-1 = rho_pi(i)^s_i) so that it descends to a flat unbased
automorphism of the duality bundle.
"""

import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sympy import ImmutableMatrix, Matrix, eye

from algebra.local_system import MonodromyRep, Word, commutant_basis, intertwiner_basis, transport
from algebra.symplectic_core import (
    IntegralLattice,
    SymplecticSpace,
    exact_matrix,
    is_symplectic,
    siegel_membership,
    to_float,
)
from geometry.fields import AffinePullbackField, CallableField
from geometry.spacetime_fields import ScalarMapField, TwistedTwoForm, transitions_for
from geometry.target_geometry import ScalarTarget, TamingField, TargetGrid
from theory.esm_residuals import EsmConfiguration, ResidualReport, residual_report
from utils.errors import DimensionError, EquivarianceViolation, IsometryViolation

logger = logging.getLogger("esm.theory.duality")

COVARIANT_EQUATIONS = ("scalar", "em", "polarization")


@dataclass(frozen=True, eq=False)
class DualityTransformation:
    """
    f = (f0, F) with f0(y) = a y + tau.

    ``generator_map[i] = (j, s)`` records that f0 carries the loop of
    generator i to generator j with exponent s = +-1. It is derived from the
    target by ``build`` and carried through ``compose``.
    """

    a: np.ndarray
    tau: np.ndarray
    lift: Any
    generator_map: Tuple[Tuple[int, int], ...] = ()

    @classmethod
    def build(cls, target: ScalarTarget, lift: Any, a: Any = None, tau: Any = None) -> "DualityTransformation":
        """
        Raises:
            DimensionError: shapes do not match the target
            IsometryViolation: a does not carry periodic directions to periodic directions
        """
        d = target.dim
        a = np.eye(d) if a is None else np.atleast_2d(np.asarray(a, dtype=float))
        tau = np.zeros(d) if tau is None else np.atleast_1d(np.asarray(tau, dtype=float))
        if a.shape != (d, d) or tau.shape != (d,):
            raise DimensionError(f"f0 has shapes {a.shape}, {tau.shape} for a {d}-dimensional target")
        target.sp.check_shape(lift, "lift")
        exact = exact_matrix(lift)
        lift = exact if exact is not None else to_float(lift)
        return cls(a, tau, lift, _generator_map(target, a))

    @classmethod
    def identity(cls, target: ScalarTarget) -> "DualityTransformation":
        return cls.build(target, eye(target.sp.dim))

    @property
    def lift_float(self) -> np.ndarray:
        return to_float(self.lift)

    @property
    def is_exact(self) -> bool:
        return isinstance(self.lift, ImmutableMatrix)

    @property
    def is_identity_on_target(self) -> bool:
        return bool(np.array_equal(self.a, np.eye(len(self.a))) and not np.any(self.tau))

    def f0(self, y: np.ndarray) -> np.ndarray:
        return np.einsum("ij,...j->...i", self.a, y) + self.tau

    def map_word(self, w: Word) -> Word:
        """Image of a loop under f0."""
        letters = []
        for g, e in w.letters:
            j, s = self.generator_map[g]
            letters.append((j, s * e))
        return Word(tuple(letters)).reduce()

    def describe(self) -> Dict[str, Any]:
        return {
            "a": self.a.tolist(),
            "tau": self.tau.tolist(),
            "lift": self.lift if self.is_exact else self.lift_float.tolist(),
            "generator_map": [list(p) for p in self.generator_map],
        }


def _generator_map(target: ScalarTarget, a: np.ndarray) -> Tuple[Tuple[int, int], ...]:
    """Read off pi and the signs from the action of a on the period vectors."""
    out = []
    for g, axis in enumerate(target.periodic_axes):
        image = a[:, axis] * target.periods[axis]
        hits = [k for k in range(target.dim) if abs(image[k]) > 1e-12]
        if len(hits) != 1 or target.periods[hits[0]] is None:
            raise IsometryViolation(f"f0 does not carry the loop of direction {axis} to a loop")
        k = hits[0]
        ratio = image[k] / target.periods[k]
        if abs(abs(ratio) - 1.0) > 1e-12:
            raise IsometryViolation(f"f0 does not carry the period of direction {axis} onto a period")
        out.append((target.generator_of_axis(k), 1 if ratio > 0 else -1))
    return tuple(out)


def check_equivariance(f: DualityTransformation, rep: MonodromyRep) -> float:
    """
    Verify that F is symplectic and intertwines the monodromy along f0.

    Returns:
        Max float deviation of F rho_i F^-1 from rho_pi(i)^s

    Raises:
        EquivarianceViolation
    """
    if not is_symplectic(f.lift, rep.sp):
        raise EquivarianceViolation("lift is not symplectic")
    worst = 0.0
    for i, (j, s) in enumerate(f.generator_map):
        expected = rep.image(j, s)
        if f.is_exact and rep.exact:
            lhs = Matrix(f.lift) * rep.images[i] * Matrix(f.lift).inv()
            if lhs != Matrix(expected):
                raise EquivarianceViolation(
                    f"lift does not intertwine generator {rep.presentation.generators[i]}",
                    {"generator": rep.presentation.generators[i]},
                )
            continue
        lf = f.lift_float
        lhs = lf @ to_float(rep.images[i]) @ np.linalg.inv(lf)
        deviation = float(np.max(np.abs(lhs - to_float(expected))))
        worst = max(worst, deviation)
        if deviation > max(rep.tol, 1e-12) * max(1.0, float(np.max(np.abs(lhs)))):
            raise EquivarianceViolation(
                f"lift does not intertwine generator {rep.presentation.generators[i]}",
                {"generator": rep.presentation.generators[i], "deviation": deviation},
            )
    return worst


def check_isometry(f: DualityTransformation, target: ScalarTarget, points: np.ndarray, tol: float) -> Dict[str, float]:
    """
    Sampled check that f0 preserves the target metric and potential.

    Raises:
        IsometryViolation
    """
    moved = f.f0(points)
    g0, g1 = target.metric_at(points), target.metric_at(moved)
    metric_dev = float(np.max(np.abs(np.einsum("ki,...kl,lj->...ij", f.a, g1, f.a) - g0), initial=0.0))
    potential_dev = float(np.max(np.abs(target.potential_at(moved) - target.potential_at(points)), initial=0.0))
    out = {"metric": metric_dev, "potential": potential_dev}
    if metric_dev > tol or potential_dev > tol:
        raise IsometryViolation("f0 is not an isometry of the scalar structure", out)
    return out


def validate_transformation(f: DualityTransformation, target: ScalarTarget, taming: TamingField, tol: float) -> Dict[str, float]:
    """Equivariance and sampled isometry against a target."""
    if len(f.generator_map) != len(target.periodic_axes):
        raise DimensionError("transformation was built for a different target")
    equivariance = check_equivariance(f, target.monodromy)
    isometry = check_isometry(f, target, taming.sample_grid.points(), tol)
    return {"equivariance": equivariance, **isometry}


def transform_taming(f: DualityTransformation, jf: TamingField) -> TamingField:
    """J_f(y) = F J(f0^-1 y) F^-1, sampled on the same grid."""
    lf = f.lift_float
    base = CallableField(jf.target.dim, (jf.sp.dim, jf.sp.dim), jf.at)
    pulled = AffinePullbackField(base, f.a, f.tau, left=lf, right=np.linalg.inv(lf))
    return replace(jf, j_field=pulled)


def apply_duality(f: DualityTransformation, cfg: EsmConfiguration) -> EsmConfiguration:
    """
    f <> (phi, V) = (f0 o phi, F V) at fixed metric, under the transformed taming.

    Winding words are carried along f0, so the new scalar map jumps by the
    image periods across each cut and the new two-form by the conjugated
    transitions.

    Raises:
        EquivarianceViolation
        IsometryViolation
    """
    validate_transformation(f, cfg.target, cfg.taming, cfg.params.tol("field_tol"))
    grid = cfg.grid
    windings = tuple(None if w is None else f.map_word(w) for w in grid.phi_winding)
    new_grid = replace(grid, phi_winding=windings)
    phi = ScalarMapField.build(new_grid, cfg.target, f.f0(cfg.phi.phi))
    v = TwistedTwoForm(
        np.einsum("ab,...bmn->...amn", f.lift_float, cfg.v.v),
        transitions_for(new_grid, cfg.target),
        new_grid,
    )
    return replace(
        cfg,
        grid=new_grid,
        g=replace(cfg.g, grid=new_grid),
        phi=phi,
        v=v,
        taming=transform_taming(f, cfg.taming),
    )


def compose(f2: DualityTransformation, f1: DualityTransformation) -> DualityTransformation:
    """f2 o f1."""
    if f1.is_exact and f2.is_exact:
        lift = ImmutableMatrix(Matrix(f2.lift) * Matrix(f1.lift))
    else:
        lift = f2.lift_float @ f1.lift_float
    generator_map = []
    for j1, s1 in f1.generator_map:
        j2, s2 = f2.generator_map[j1]
        generator_map.append((j2, s1 * s2))
    return DualityTransformation(f2.a @ f1.a, f2.a @ f1.tau + f2.tau, lift, tuple(generator_map))


@dataclass
class CovarianceReport:
    original: ResidualReport
    transformed: ResidualReport
    discrepancy: Dict[str, float]
    tolerance: float
    einstein_discrepancy: float = 0.0

    @property
    def max_discrepancy(self) -> float:
        return max(self.discrepancy.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_discrepancy <= self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {
            "original": self.original.to_dict(),
            "transformed": self.transformed.to_dict(),
            "discrepancy": self.discrepancy,
            "max_discrepancy": self.max_discrepancy,
            "einstein_discrepancy": self.einstein_discrepancy,
            "tolerance": self.tolerance,
        }


def _relative_gap(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def covariance_check(f: DualityTransformation, cfg: EsmConfiguration, tol: Optional[float] = None) -> CovarianceReport:
    """
    Compare the residual norms of cfg under its structure with those of f <> cfg
    under the transformed structure.

    The scalar and electromagnetic norms (and the polarization diagnostic)
    must agree within tol; the Einstein norms are compared as a diagnostic.
    """
    tol = cfg.params.tol("covariance_tol") if tol is None else tol
    before = residual_report(cfg)
    after = residual_report(apply_duality(f, cfg))
    discrepancy = {}
    for name in COVARIANT_EQUATIONS:
        discrepancy[name] = max(
            _relative_gap(before.norms[name][k], after.norms[name][k]) for k in ("max", "rms")
        )
    einstein = max(_relative_gap(before.norms["einstein"][k], after.norms["einstein"][k]) for k in ("max", "rms"))
    report = CovarianceReport(before, after, discrepancy, tol, einstein)
    logger.info(f"covariance discrepancy {report.max_discrepancy:.3e} (tolerance {tol:.1e})")
    return report


def is_symmetry(f: DualityTransformation, jf: TamingField, tol: float = 1e-8) -> bool:
    """True iff Ad(f) fixes the taming on its sample grid."""
    points = jf.sample_grid.points()
    moved = transform_taming(f, jf).at(points)
    return bool(np.max(np.abs(moved - jf.at(points)), initial=0.0) <= tol)


def is_integral_duality(f: DualityTransformation, lat: IntegralLattice, sp: Optional[SymplecticSpace] = None) -> bool:
    """
    True iff the lift is symplectic and preserves the lattice.

    The symplectic form defaults to the standard one of the lattice rank.

    Raises:
        DimensionError: float lift or shape mismatch
    """
    if not f.is_exact:
        raise DimensionError("integrality of a duality requires an exact lift")
    sp = SymplecticSpace.standard(lat.basis.shape[0] // 2) if sp is None else sp
    return siegel_membership(f.lift, lat, sp)


def _commutes(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    return bool(np.max(np.abs(a @ b - b @ a)) <= tol * max(1.0, float(np.max(np.abs(a)))))


def exact_sequence_check(
    target: ScalarTarget,
    transformations: Sequence[DualityTransformation],
    taming: Optional[TamingField] = None,
    height: int = 2,
    tol: float = 1e-8,
) -> Dict[str, Any]:
    """
    Check the duality and symmetry extensions on a finite sample.

    Kernel: a transformation over the identity of the target is a duality
    iff its lift lies in the symplectic commutant of the monodromy. With a
    taming, the symmetries over the identity are the commutant elements
    that also commute with J. Projection: f0 of a composition is the
    composition of the f0's.
    """
    rep = target.monodromy
    commutant = commutant_basis(rep)
    violations: List[str] = []
    kernel = []

    candidates = list(transformations)
    for m in commutant.symplectic_sample(height):
        candidates.append(DualityTransformation.build(target, m))

    for index, f in enumerate(candidates):
        if not f.is_identity_on_target:
            continue
        in_commutant = commutant.contains(f.lift) if f.is_exact else all(
            _commutes(f.lift_float, img, tol) for img in rep.float_images()
        )
        try:
            check_equivariance(f, rep)
            equivariant = True
        except EquivarianceViolation:
            equivariant = False
        symplectic = is_symplectic(f.lift, rep.sp)
        entry = {"index": index, "in_commutant": in_commutant, "duality": equivariant}
        if equivariant != (in_commutant and symplectic):
            violations.append(f"kernel mismatch for sample {index}")
        if taming is not None:
            symmetric = is_symmetry(f, taming, tol)
            points = taming.sample_grid.points()
            j_values = taming.at(points).reshape(-1, rep.dim, rep.dim)
            commutes_j = all(_commutes(f.lift_float, jv, tol) for jv in j_values)
            entry["symmetry"] = symmetric
            if symmetric != (equivariant and commutes_j):
                violations.append(f"symmetry kernel mismatch for sample {index}")
        kernel.append(entry)

    projection = []
    for i, f1 in enumerate(transformations):
        for k, f2 in enumerate(transformations):
            composite = compose(f2, f1)
            samples = taming.sample_grid.points() if taming is not None else np.zeros((1, target.dim))
            gap = float(np.max(np.abs(composite.f0(samples) - f2.f0(f1.f0(samples))), initial=0.0))
            projection.append({"pair": [k, i], "gap": gap})
            if gap > tol:
                violations.append(f"projection of composite {k} o {i} differs by {gap:.3e}")

    logger.debug(f"exact sequence check: {len(kernel)} kernel samples, {len(violations)} violations")
    return {
        "commutant_dimension": commutant.dimension,
        "kernel": kernel,
        "projection": projection,
        "violations": violations,
        "ok": not violations,
    }


def deck_equivalent(cfg1: EsmConfiguration, cfg2: EsmConfiguration, tol: float = 1e-9) -> Dict[str, Any]:
    """
    Whether two configurations agree after re-identifying the lift.

    They agree when phi2 = phi1 + period(w) and V2 = rho(w) V1 for one loop w
    of the target, with equal grids and metrics.
    """
    target = cfg1.target
    if cfg1.grid.shape != cfg2.grid.shape or cfg1.v.v.shape != cfg2.v.v.shape:
        return {"equivalent": False, "reason": "grids differ"}
    metric_gap = float(np.max(np.abs(cfg1.g.g - cfg2.g.g), initial=0.0))
    delta = cfg2.phi.phi - cfg1.phi.phi
    first = delta.reshape(-1, target.dim)[0]
    w = Word.empty()
    for g, axis in enumerate(target.periodic_axes):
        k = int(np.rint(first[axis] / target.periods[axis]))
        if k:
            w = w * Word.generator(g, k)
    phi_gap = float(np.max(np.abs(delta - target.period_vector(w)), initial=0.0))
    rho = to_float(transport(target.monodromy, w))
    v_gap = float(np.max(np.abs(cfg2.v.v - np.einsum("ab,...bmn->...amn", rho, cfg1.v.v)), initial=0.0))
    equivalent = max(metric_gap, phi_gap, v_gap) <= tol
    return {
        "equivalent": equivalent,
        "word": w.format(target.monodromy.presentation.generators),
        "metric_gap": metric_gap,
        "phi_gap": phi_gap,
        "v_gap": v_gap,
    }


def reflection_lifts(target: ScalarTarget, height: int = 2) -> List[ImmutableMatrix]:
    """
    Symplectic lifts for f0(y) = -y: F rho_i F^-1 = rho_i^-1 on every generator.

    Empty when no such F is found, e.g. for parabolic monodromy, which is not
    conjugate to its inverse in Sp(2, R).
    """
    rep = target.monodromy
    inverted = rep.with_images([rep.image(i, -1) for i in range(rep.presentation.rank)])
    lifts = intertwiner_basis(rep, inverted).symplectic_sample(height)
    return lifts + [ImmutableMatrix(-Matrix(m)) for m in lifts if ImmutableMatrix(-Matrix(m)) not in lifts]


def random_transformations(
    target: ScalarTarget,
    rng: np.random.Generator,
    count: int,
    height: int = 2,
    points: Optional[np.ndarray] = None,
    tol: float = 1e-9,
) -> List[DualityTransformation]:
    """
    Deterministic-per-seed sample of dualities.

    Two cosets are drawn from: translations f0(y) = y + tau with lifts from the
    symplectic commutant (with -1 included), and reflections f0(y) = -y + tau
    with lifts from ``reflection_lifts``. The reflection coset is used only
    when it preserves the target metric and potential on ``points``. The
    translation is uniform along periodic directions; a draw that breaks the
    potential falls back to tau = 0.
    """
    if points is None:
        points = TargetGrid.for_target(target, [9] * target.dim).points()
    lifts = commutant_basis(target.monodromy).symplectic_sample(height)
    cosets = [(np.eye(target.dim), lifts + [ImmutableMatrix(-Matrix(m)) for m in lifts])]

    reflected = reflection_lifts(target, height)
    if reflected:
        try:
            check_isometry(DualityTransformation.build(target, reflected[0], -np.eye(target.dim)), target, points, tol)
            cosets.append((-np.eye(target.dim), reflected))
        except IsometryViolation:
            logger.debug("target is not reflection symmetric; sampling translations only")

    out = []
    for _ in range(count):
        a, choices = cosets[int(rng.integers(len(cosets)))]
        lift = choices[int(rng.integers(len(choices)))]
        tau = np.zeros(target.dim)
        for axis in target.periodic_axes:
            tau[axis] = rng.uniform(0.0, target.periods[axis])
        f = DualityTransformation.build(target, lift, a, tau)
        try:
            check_isometry(f, target, points, tol)
        except IsometryViolation:
            f = DualityTransformation.build(target, lift, a)
        out.append(f)
    return out
