"""
Validate command: run every constructor invariant of a scenario.
"""

from typing import Any, Dict, Optional

import numpy as np

from algebra.local_system import preserves_lattice
from commands.base_command import BaseCommand, CommandResult, combine, verdict
from core.reports import STATUS_PASS
from core.scenario import Scenario
from geometry.spacetime_fields import polarization_violation
from geometry.target_geometry import check_twisted_periodicity
from theory.duality_action import validate_transformation

SKIPPED = {"status": "skipped", "reason": "an earlier structural check failed"}


class ValidateCommand(BaseCommand):
    """Checks relations, lattice, taming, periodicity, cut compatibility and polarization."""

    name = "validate"

    def execute(self, scenario: Optional[Scenario]) -> CommandResult:
        b = self.builder(scenario)
        tol = b.params.tol("field_tol")
        strict = bool(self.options.get("strict"))
        checks: Dict[str, Dict[str, Any]] = {}

        checks["monodromy"] = self.guarded("monodromy", self._monodromy, b)
        checks["lattice"] = self.guarded("lattice", self._lattice, b)
        checks["target_metric"] = self.guarded("target_metric", self._target_metric, b)
        checks["taming"] = self.guarded("taming", self._taming, b, tol)
        structural_ok = all(c["status"] == STATUS_PASS for c in checks.values())

        if structural_ok:
            checks["twisted_periodicity"] = self.guarded(
                "twisted_periodicity", self._periodicity, b, tol, strict
            )
        else:
            checks["twisted_periodicity"] = dict(SKIPPED)

        if scenario.has("spacetime"):
            if structural_ok:
                checks["spacetime_metric"] = self.guarded("spacetime_metric", lambda: self._ok(b.metric))
                checks["scalar_map"] = self.guarded("scalar_map", self._scalar_map, b)
                checks["two_form"] = self.guarded("two_form", lambda: self._ok(b.two_form))
                if all(checks[k]["status"] == STATUS_PASS for k in ("spacetime_metric", "scalar_map", "two_form")):
                    checks["polarization"] = self.guarded("polarization", self._polarization, b, tol)
            else:
                for key in ("spacetime_metric", "scalar_map", "two_form"):
                    checks[key] = dict(SKIPPED)

        for loc, entry in b.transformation_entries() if structural_ok else []:
            checks[loc] = self.guarded(loc, self._transformation, b, entry, loc, tol)

        status = combine(*(c["status"] for c in checks.values() if c["status"] != "skipped"))
        failed = [k for k, c in checks.items() if c["status"] not in (STATUS_PASS, "skipped")]
        if failed:
            self.logger.warning(f"validate: failed checks {failed}")
        return CommandResult(status, {"checks": checks, "scenario": scenario.name})

    @staticmethod
    def _ok(_: Any) -> Dict[str, Any]:
        return {"status": STATUS_PASS}

    def _monodromy(self, b) -> Dict[str, Any]:
        rep = b.monodromy
        return {
            "status": STATUS_PASS,
            "generators": list(rep.presentation.generators),
            "relations": len(rep.presentation.relations),
            "exact": rep.exact,
        }

    def _lattice(self, b) -> Dict[str, Any]:
        lat = b.lattice
        if lat is None:
            return {"status": STATUS_PASS, "present": False}
        preserved = preserves_lattice(b.monodromy, lat)
        return {
            "status": verdict(preserved),
            "present": True,
            "type": list(lat.type_divisors),
            "preserved_by_monodromy": preserved,
        }

    def _target_metric(self, b) -> Dict[str, Any]:
        b.target.check_metric(b.taming.sample_grid.points())
        return {"status": STATUS_PASS, "dim": b.target.dim, "periods": list(b.target.periods)}

    def _taming(self, b, tol: float) -> Dict[str, Any]:
        samples = b.taming.validate(tol)
        return {"status": STATUS_PASS, "samples": samples}

    def _periodicity(self, b, tol: float, strict: bool) -> Dict[str, Any]:
        report = check_twisted_periodicity(b.target, b.taming, tol, strict)
        return {"status": verdict(report["ok"]), **report}

    def _scalar_map(self, b) -> Dict[str, Any]:
        phi = b.phi
        windings = {
            str(axis): w.format(b.presentation.generators)
            for axis, w in enumerate(phi.grid.phi_winding)
            if w is not None and len(w)
        }
        return {"status": STATUS_PASS, "windings": windings}

    def _polarization(self, b, tol: float) -> Dict[str, Any]:
        cfg = b.configuration
        if b.declares_polarized:
            violation = cfg.validate()
            return {"status": STATUS_PASS, "violation": violation, "declared": True}
        violation = float(np.max(polarization_violation(cfg.v, cfg.context()), initial=0.0))
        return {"status": STATUS_PASS, "violation": violation, "declared": False}

    def _transformation(self, b, entry: Dict[str, Any], loc: str, tol: float) -> Dict[str, Any]:
        f = b.build_transformation(entry, loc)
        gaps = validate_transformation(f, b.target, b.taming, tol)
        return {"status": STATUS_PASS, **gaps, "transformation": f.describe()}
