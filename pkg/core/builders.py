"""
Scenario builders: turn a parsed scenario into library objects.

Each section is built lazily and at most once, so commands only pay for the
parts of a scenario they use and missing optional sections only fail when
something asks for them.
"""

import logging
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sympy import ImmutableMatrix, cos, lambdify, symbols

from algebra.local_system import GroupPresentation, MonodromyRep, Word
from algebra.symplectic_core import (
    DEFAULT_TOLERANCES,
    EsmParameters,
    IntegralLattice,
    SymplecticSpace,
    standard_complex_structure,
    standard_omega,
    to_float,
)
from core.scenario import (
    Scenario,
    load_scenario,
    parse_expression,
    parse_float,
    parse_int,
    parse_list,
    parse_matrix,
    parse_scalar,
    require,
)
from geometry.fields import BaseField, ConjugatedField, ConstantField, ExpressionField, target_symbols
from geometry.spacetime_fields import (
    NDIM,
    HodgeContext,
    LorentzMetricField,
    ScalarMapField,
    SpacetimeGrid,
    TwistedTwoForm,
    polarize,
    transitions_for,
)
from geometry.target_geometry import ScalarTarget, TamingField, TargetGrid, ufold_frame
from theory.duality_action import DualityTransformation
from theory.esm_residuals import EsmConfiguration
from utils.errors import InputError, ParseError

logger = logging.getLogger("esm.core.builders")

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
BUNDLED = ("vacuum", "plane_wave", "half_period", "ufold")

SPACETIME = symbols("t x y z")
AXIS_INDEX = {"t": 0, "x": 1, "y": 2, "z": 3}
DEFAULT_SAMPLES = 8


def bundled_path(name: str) -> Path:
    return SCENARIO_DIR / f"{name}.yaml"


def load_bundled(name: str) -> Scenario:
    """
    Raises:
        ParseError: unknown bundled scenario
    """
    if name not in BUNDLED:
        raise ParseError(f"unknown bundled scenario '{name}'", "<bundled>")
    return load_scenario(str(bundled_path(name)))


def parse_axis(value: Any, location: str) -> int:
    if isinstance(value, str) and value in AXIS_INDEX:
        return AXIS_INDEX[value]
    if isinstance(value, int) and not isinstance(value, bool) and 0 <= value < NDIM:
        return value
    raise ParseError(f"{value!r} is not a spacetime direction (t, x, y, z or 0..3)", location)


def _vectorize(exprs: Sequence[Any], variables: Sequence[Any], value_shape: Tuple[int, ...]) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized evaluation of a flat list of expressions at points (..., len(variables))."""
    funcs = [lambdify(tuple(variables), e, "numpy") for e in exprs]

    def evaluate(points: np.ndarray) -> np.ndarray:
        batch = points.shape[:-1]
        coords = [points[..., i] for i in range(len(variables))]
        out = np.empty(batch + (len(funcs),))
        for k, func in enumerate(funcs):
            out[..., k] = np.broadcast_to(np.asarray(func(*coords), dtype=float), batch)
        return out.reshape(batch + value_shape)

    return evaluate


class ScenarioBuilder:
    """Builds the objects described by a scenario, one section at a time."""

    def __init__(self, scenario: Scenario, config: Optional[Dict[str, Any]] = None, refine: int = 1,
                 tolerance_overrides: Optional[Dict[str, float]] = None):
        """
        Initialize the builder.

        Args:
            scenario: Parsed scenario
            config: Application configuration (tolerance and numerics defaults)
            refine: Grid refinement factor for convergence studies
            tolerance_overrides: Tolerances given on the command line
        """
        self.scenario = scenario
        self.config = config or {}
        self.refine = refine
        self.tolerance_overrides = dict(tolerance_overrides or {})
        self.data = scenario.data

    # Parameters and algebra

    @cached_property
    def constants(self) -> Dict[str, Any]:
        raw = self.data.get("constants") or {}
        if not isinstance(raw, dict):
            raise ParseError("expected a mapping", "constants")
        return {str(k): parse_scalar(v, f"constants.{k}") for k, v in raw.items()}

    @cached_property
    def params(self) -> EsmParameters:
        tolerances = dict(DEFAULT_TOLERANCES)
        tolerances.update(self.config.get("tolerances") or {})
        kappa = float((self.config.get("general") or {}).get("default_kappa", 1.0))
        section = self.data.get("params") or {}
        if "kappa" in section:
            kappa = parse_float(section["kappa"], "params.kappa")
        for name, value in (section.get("tolerances") or {}).items():
            if name not in DEFAULT_TOLERANCES:
                raise ParseError(f"unknown tolerance '{name}'", f"params.tolerances.{name}")
            tolerances[name] = parse_float(value, f"params.tolerances.{name}")
        tolerances.update(self.tolerance_overrides)
        try:
            return EsmParameters(kappa, tolerances)
        except ValueError as e:
            raise ParseError(str(e), "params") from e

    @cached_property
    def numerics(self) -> Dict[str, float]:
        numerics = {"gradient_step": 1e-4, "target_step": 1e-3}
        numerics.update(self.config.get("numerics") or {})
        return numerics

    @cached_property
    def sp(self) -> SymplecticSpace:
        section = self.data.get("symplectic") or {"dim": 2}
        if "omega" in section:
            omega = parse_matrix(section["omega"], "symplectic.omega")
            if isinstance(omega, np.ndarray):
                raise ParseError("symplectic form must be exact", "symplectic.omega")
            return SymplecticSpace(omega)
        dim = parse_int(require(section, "dim", "symplectic"), "symplectic.dim", 2)
        if dim % 2:
            raise ParseError("fiber dimension must be even", "symplectic.dim")
        return SymplecticSpace(standard_omega(dim // 2))

    @cached_property
    def lattice(self) -> Optional[IntegralLattice]:
        section = self.data.get("lattice")
        if section is None:
            return None
        if section == "standard":
            return IntegralLattice.standard(self.sp)
        basis = parse_matrix(require(section, "basis", "lattice"), "lattice.basis", (self.sp.dim, self.sp.dim))
        if isinstance(basis, np.ndarray):
            raise ParseError("lattice basis must be exact", "lattice.basis")
        return IntegralLattice.from_basis(basis, self.sp)

    @cached_property
    def periods(self) -> Tuple[Optional[float], ...]:
        section = self.data.get("target") or {"dim": 1}
        dim = parse_int(require(section, "dim", "target"), "target.dim", 1)
        raw = section.get("periods", [None] * dim)
        raw = parse_list(raw, "target.periods", dim)
        return tuple(None if p is None else parse_float(p, f"target.periods[{i}]") for i, p in enumerate(raw))

    @cached_property
    def presentation(self) -> GroupPresentation:
        section = self.data.get("presentation")
        if section is None:
            rank = sum(1 for p in self.periods if p is not None)
            return GroupPresentation.free_abelian(rank)
        gens = parse_list(require(section, "generators", "presentation"), "presentation.generators")
        relations = parse_list(section.get("relations", []), "presentation.relations")
        return GroupPresentation.build(gens, relations)

    @cached_property
    def monodromy(self) -> MonodromyRep:
        section = (self.data.get("target") or {}).get("monodromy", self.data.get("monodromy"))
        images = {}
        for name in self.presentation.generators:
            if section and name in section:
                images[name] = parse_matrix(section[name], f"monodromy.{name}", (self.sp.dim, self.sp.dim))
            else:
                images[name] = ImmutableMatrix.eye(self.sp.dim)
        if section:
            extra = set(section) - set(self.presentation.generators)
            if extra:
                raise ParseError(f"images for undeclared generators {sorted(extra)}", "monodromy")
        return MonodromyRep.build(self.presentation, self.sp, images, self.lattice, self.params.tol("alg_tol"))

    # Target

    def _target_locals(self, dim: int) -> Dict[str, Any]:
        names = {str(s): s for s in target_symbols(dim)}
        names.update(self.constants)
        return names

    def _target_field(self, entry: Any, dim: int, value_shape: Tuple[int, ...], location: str, default: Any) -> BaseField:
        if entry is None:
            return ConstantField(dim, default)
        if isinstance(entry, (int, float, str)) and value_shape == ():
            entry = {"expression": entry}
        if not isinstance(entry, dict) or len(entry) != 1:
            raise ParseError("expected one of constant, diagonal, expression", location)
        kind, value = next(iter(entry.items()))
        local_names = self._target_locals(dim)
        if kind == "constant":
            if value_shape == ():
                return ConstantField(dim, parse_float(value, f"{location}.constant"))
            return ConstantField(dim, to_float(parse_matrix(value, f"{location}.constant", value_shape)))
        if kind == "diagonal":
            entries = parse_list(value, f"{location}.diagonal", value_shape[0])
            exprs = [[0] * value_shape[0] for _ in range(value_shape[0])]
            for i, e in enumerate(entries):
                exprs[i][i] = parse_expression(e, f"{location}.diagonal[{i}]", local_names)
            return ExpressionField(dim, exprs)
        if kind == "expression":
            if value_shape == ():
                return ExpressionField(dim, parse_expression(value, f"{location}.expression", local_names))
            if len(value_shape) == 1:
                entries = parse_list(value, f"{location}.expression", value_shape[0])
                return ExpressionField(dim, [parse_expression(e, f"{location}.expression[{i}]", local_names)
                                             for i, e in enumerate(entries)])
            rows = parse_list(value, f"{location}.expression", value_shape[0])
            exprs = []
            for i, row in enumerate(rows):
                row = parse_list(row, f"{location}.expression[{i}]", value_shape[1])
                exprs.append([parse_expression(e, f"{location}.expression[{i}][{j}]", local_names)
                              for j, e in enumerate(row)])
            return ExpressionField(dim, exprs)
        raise ParseError(f"unknown field kind '{kind}'", location)

    @cached_property
    def target(self) -> ScalarTarget:
        section = self.data.get("target") or {"dim": 1}
        dim = len(self.periods)
        metric = self._target_field(section.get("metric"), dim, (dim, dim), "target.metric", np.eye(dim))
        potential = self._target_field(section.get("potential"), dim, (), "target.potential", 0.0)
        gradient = None
        if section.get("gradient") is not None:
            gradient = self._target_field(section["gradient"], dim, (dim,), "target.gradient", np.zeros(dim))
        return ScalarTarget(dim, self.periods, metric, potential, self.monodromy, gradient,
                            float(self.numerics["gradient_step"]))

    @cached_property
    def frame(self) -> Optional[BaseField]:
        """Frame E(y) of a taming given as E J0 E^-1, if any."""
        entry = (self.data.get("target") or {}).get("taming")
        if not isinstance(entry, dict):
            return None
        dim = len(self.periods)
        if "ufold" in entry:
            options = entry["ufold"] or {}
            length = options.get("length") if isinstance(options, dict) else None
            if length is None:
                length = self.periods[0]
            if length is None or dim != 1:
                raise ParseError("the ufold frame needs a one-dimensional periodic target", "target.taming.ufold")
            return ufold_frame(parse_float(length, "target.taming.ufold.length"))
        if "frame" in entry:
            return self._target_field({"expression": entry["frame"]}, dim, (self.sp.dim, self.sp.dim),
                                      "target.taming.frame", None)
        return None

    @cached_property
    def taming(self) -> TamingField:
        section = self.data.get("target") or {}
        entry = section.get("taming", "standard")
        dim = len(self.periods)
        j0 = to_float(standard_complex_structure(self.sp.n))
        if self.frame is not None:
            j_field: BaseField = ConjugatedField(self.frame, j0)
        elif entry == "standard" or entry is None:
            j_field = ConstantField(dim, j0)
        else:
            j_field = self._target_field(entry, dim, (self.sp.dim, self.sp.dim), "target.taming", j0)
        samples = section.get("samples", [DEFAULT_SAMPLES] * dim)
        samples = [parse_int(n, f"target.samples[{i}]", 3) for i, n in enumerate(parse_list(samples, "target.samples", dim))]
        bounds = section.get("bounds")
        if bounds is not None:
            bounds = [tuple(parse_float(b, f"target.bounds[{i}]") for b in parse_list(pair, f"target.bounds[{i}]", 2))
                      for i, pair in enumerate(parse_list(bounds, "target.bounds", dim))]
        grid = TargetGrid.for_target(self.target, samples, bounds)
        return TamingField(j_field, grid, self.target)

    # Spacetime

    def _spacetime_locals(self) -> Dict[str, Any]:
        names = {str(s): s for s in SPACETIME}
        names.update(self.constants)
        return names

    @cached_property
    def grid(self) -> SpacetimeGrid:
        section = self.data.get("spacetime")
        if section is None:
            raise InputError("scenario has no 'spacetime' section", {"section": "spacetime"})
        shape = [parse_int(n, f"spacetime.shape[{i}]", 3) for i, n in enumerate(parse_list(require(section, "shape", "spacetime"), "spacetime.shape", NDIM))]
        periodic = [bool(p) for p in parse_list(section.get("periodic", [False] * NDIM), "spacetime.periodic", NDIM)]
        origin = [parse_float(o, f"spacetime.origin[{i}]") for i, o in enumerate(parse_list(section.get("origin", [0.0] * NDIM), "spacetime.origin", NDIM))]
        if "spacing" in section:
            spacing = [parse_float(h, f"spacetime.spacing[{i}]") for i, h in enumerate(parse_list(section["spacing"], "spacetime.spacing", NDIM))]
        else:
            extent = [parse_float(e, f"spacetime.extent[{i}]") for i, e in enumerate(parse_list(require(section, "extent", "spacetime"), "spacetime.extent", NDIM))]
            spacing = [e / n if p else e / (n - 1) for e, n, p in zip(extent, shape, periodic)]
        windings: List[Optional[Word]] = [None] * NDIM
        for key, word in (section.get("phi_winding") or {}).items():
            axis = parse_axis(key, f"spacetime.phi_winding.{key}")
            windings[axis] = Word.parse(word, self.presentation.generators, f"spacetime.phi_winding.{key}")
        grid = SpacetimeGrid(tuple(shape), tuple(spacing), tuple(periodic), tuple(origin), tuple(windings))
        return grid.refine(self.refine) if self.refine > 1 else grid

    @cached_property
    def metric(self) -> LorentzMetricField:
        entry = self.data.get("metric", "minkowski")
        if entry == "minkowski" or entry is None:
            return LorentzMetricField.minkowski(self.grid)
        if not isinstance(entry, dict) or len(entry) != 1:
            raise ParseError("expected minkowski, diagonal or expression", "metric")
        kind, value = next(iter(entry.items()))
        local_names = self._spacetime_locals()
        if kind == "diagonal":
            entries = parse_list(value, "metric.diagonal", NDIM)
            exprs = [[parse_expression(e, f"metric.diagonal[{i}]", local_names) if i == j else 0
                      for j in range(NDIM)] for i, e in enumerate(entries)]
        elif kind == "expression":
            rows = parse_list(value, "metric.expression", NDIM)
            exprs = [[parse_expression(e, f"metric.expression[{i}][{j}]", local_names)
                      for j, e in enumerate(parse_list(row, f"metric.expression[{i}]", NDIM))]
                     for i, row in enumerate(rows)]
        else:
            raise ParseError(f"unknown metric kind '{kind}'", "metric")
        flat = [e for row in exprs for e in row]
        return LorentzMetricField.from_function(self.grid, _vectorize(flat, SPACETIME, (NDIM, NDIM)))

    @cached_property
    def phi_function(self) -> Callable[[np.ndarray], np.ndarray]:
        entry = self.data.get("phi")
        d = self.target.dim
        if entry is None:
            entry = {"constant": [0] * d}
        if not isinstance(entry, dict) or len(entry) != 1:
            raise ParseError("expected one of constant, linear, expression", "phi")
        kind, value = next(iter(entry.items()))
        local_names = self._spacetime_locals()
        if kind == "constant":
            const = [parse_float(c, f"phi.constant[{i}]") for i, c in enumerate(parse_list(value, "phi.constant", d))]
            exprs = const
        elif kind == "linear":
            offset = parse_list(value.get("offset", [0] * d), "phi.linear.offset", d)
            slopes = parse_list(require(value, "slopes", "phi.linear"), "phi.linear.slopes", d)
            exprs = []
            for i in range(d):
                row = parse_list(slopes[i], f"phi.linear.slopes[{i}]", NDIM)
                e = parse_expression(offset[i], f"phi.linear.offset[{i}]", local_names)
                for mu, s in enumerate(row):
                    e = e + parse_expression(s, f"phi.linear.slopes[{i}][{mu}]", local_names) * SPACETIME[mu]
                exprs.append(e)
        elif kind == "expression":
            exprs = [parse_expression(e, f"phi.expression[{i}]", local_names)
                     for i, e in enumerate(parse_list(value, "phi.expression", d))]
        else:
            raise ParseError(f"unknown phi kind '{kind}'", "phi")
        return _vectorize(exprs, SPACETIME, (d,))

    @cached_property
    def phi(self) -> ScalarMapField:
        return ScalarMapField.from_function(self.grid, self.target, self.phi_function, self.params.tol("field_tol"))

    @cached_property
    def transitions(self) -> Tuple[Optional[np.ndarray], ...]:
        return transitions_for(self.grid, self.target)

    def _two_form_function(self, entry: Dict[str, Any]) -> Callable[[np.ndarray], np.ndarray]:
        rank = self.sp.dim
        local_names = self._spacetime_locals()
        pieces = []
        if "plane_wave" in entry:
            wave = entry["plane_wave"]
            k = [parse_expression(c, f"V.plane_wave.wavevector[{i}]", local_names)
                 for i, c in enumerate(parse_list(require(wave, "wavevector", "V.plane_wave"), "V.plane_wave.wavevector", NDIM))]
            p = [parse_float(c, f"V.plane_wave.polarization[{i}]")
                 for i, c in enumerate(parse_list(require(wave, "polarization", "V.plane_wave"), "V.plane_wave.polarization", NDIM))]
            fiber = [parse_float(c, f"V.plane_wave.fiber[{i}]")
                     for i, c in enumerate(parse_list(require(wave, "fiber", "V.plane_wave"), "V.plane_wave.fiber", rank))]
            amplitude = parse_float(wave.get("amplitude", 1), "V.plane_wave.amplitude")
            phase = sum(kc * s for kc, s in zip(k, SPACETIME))
            kf = np.array([float(c) for c in k])
            wedge = np.outer(kf, p) - np.outer(p, kf)
            pieces.append((np.array(fiber), wedge, amplitude * cos(phase)))
        for i, term in enumerate(entry.get("terms") or []):
            loc = f"V.terms[{i}]"
            fiber = [parse_float(c, f"{loc}.fiber[{a}]") for a, c in enumerate(parse_list(require(term, "fiber", loc), f"{loc}.fiber", rank))]
            form = parse_list(require(term, "form", loc), f"{loc}.form", 2)
            mu, nu = parse_axis(form[0], f"{loc}.form[0]"), parse_axis(form[1], f"{loc}.form[1]")
            if mu == nu:
                raise ParseError("form indices must differ", f"{loc}.form")
            wedge = np.zeros((NDIM, NDIM))
            wedge[mu, nu], wedge[nu, mu] = 1.0, -1.0
            pieces.append((np.array(fiber), wedge, parse_expression(term.get("expression", 1), f"{loc}.expression", local_names)))
        scale = parse_float(entry.get("scale", 1), "V.scale")
        funcs = [(fiber, wedge, _vectorize([expr], SPACETIME, ())) for fiber, wedge, expr in pieces]
        frame = self.frame if entry.get("frame") else None
        if entry.get("frame") and frame is None:
            raise ParseError("V asks for the taming frame but the taming has none", "V.frame")
        phi_function = self.phi_function

        def evaluate(coords: np.ndarray) -> np.ndarray:
            out = np.zeros(coords.shape[:-1] + (rank, NDIM, NDIM))
            for fiber, wedge, func in funcs:
                out += np.einsum("a,mn,...->...amn", fiber, wedge, func(coords))
            if frame is not None:
                out = np.einsum("...ab,...bmn->...amn", frame(phi_function(coords)), out)
            return scale * out

        return evaluate

    @cached_property
    def two_form(self) -> TwistedTwoForm:
        entry = self.data.get("V", "zero")
        if entry == "zero" or entry is None or (isinstance(entry, dict) and entry.get("zero")):
            return TwistedTwoForm.zeros(self.grid, self.transitions, self.sp.dim)
        if not isinstance(entry, dict):
            raise ParseError("expected 'zero' or a mapping", "V")
        v = TwistedTwoForm.from_function(self.grid, self.transitions, self._two_form_function(entry),
                                         self.params.tol("field_tol"))
        if entry.get("polarize"):
            v = polarize(v, HodgeContext.build(self.metric, self.taming, self.phi))
        return v

    @cached_property
    def configuration(self) -> EsmConfiguration:
        return EsmConfiguration(self.grid, self.metric, self.phi, self.two_form, self.target, self.taming, self.params,
                                float(self.numerics["target_step"]))

    @property
    def declares_polarized(self) -> bool:
        entry = self.data.get("V", "zero")
        if not isinstance(entry, dict) or entry.get("zero"):
            return True
        return bool(entry.get("polarize") or entry.get("polarized"))

    # Transformations

    def transformation_entries(self) -> List[Tuple[str, Dict[str, Any]]]:
        out = []
        if self.data.get("transformation") is not None:
            out.append(("transformation", self.data["transformation"]))
        for i, entry in enumerate(self.data.get("transformations") or []):
            out.append((f"transformations[{i}]", entry))
        return out

    def build_transformation(self, entry: Dict[str, Any], location: str) -> DualityTransformation:
        dim = self.target.dim
        f0 = entry.get("f0", "identity")
        a, tau = None, None
        if f0 != "identity":
            if not isinstance(f0, dict):
                raise ParseError("expected 'identity' or a mapping", f"{location}.f0")
            if "linear" in f0:
                a = to_float(parse_matrix(f0["linear"], f"{location}.f0.linear", (dim, dim)))
            if "translation" in f0:
                tau = np.array([parse_float(c, f"{location}.f0.translation[{i}]")
                                for i, c in enumerate(parse_list(f0["translation"], f"{location}.f0.translation", dim))])
        lift = parse_matrix(require(entry, "lift", location), f"{location}.lift", (self.sp.dim, self.sp.dim))
        return DualityTransformation.build(self.target, lift, a, tau)

    @cached_property
    def transformations(self) -> List[DualityTransformation]:
        return [self.build_transformation(entry, loc) for loc, entry in self.transformation_entries()]