"""
Duality command: covariance of the field equations under duality transformations.
"""

from typing import Any, Dict, List, Optional

import numpy as np

from commands.base_command import BaseCommand, CommandResult, combine, verdict
from core.reports import STATUS_PASS
from core.scenario import Scenario
from theory.duality_action import (
    DualityTransformation,
    covariance_check,
    exact_sequence_check,
    is_integral_duality,
    is_symmetry,
    random_transformations,
)
from utils.errors import MissingSection

DEFAULT_RANDOM_COUNT = 5


class DualityCommand(BaseCommand):
    """Applies each transformation and compares residual norms before and after."""

    name = "duality"

    def transformations(self, b) -> List[DualityTransformation]:
        found = list(b.transformations)
        seed = self.options.get("seed")
        if seed is not None:
            rng = np.random.default_rng(int(seed))
            count = int(self.options.get("random_count") or DEFAULT_RANDOM_COUNT)
            height = int(self.limits.get("conjugator_height", 2))
            found.extend(random_transformations(b.target, rng, count, height))
        if not found:
            raise MissingSection("scenario has no 'transformation' section and no --seed was given",
                                 {"section": "transformation"})
        return found

    def execute(self, scenario: Optional[Scenario]) -> CommandResult:
        scenario.section("spacetime")
        b = self.builder(scenario)
        cfg = b.configuration
        tol = b.params.tol("covariance_tol")
        entries: List[Dict[str, Any]] = []
        statuses = []
        for index, f in enumerate(self.transformations(b)):
            entry = self.guarded(f"transformation_{index}", self._check, b, cfg, f, tol)
            entries.append(entry)
            statuses.append(entry["status"])

        sequence = self.guarded("exact_sequence", self._exact_sequence, b)
        statuses.append(sequence["status"])
        results = {"transformations": entries, "exact_sequence": sequence, "tolerance": tol}
        return CommandResult(combine(*statuses), results)

    def _check(self, b, cfg, f: DualityTransformation, tol: float) -> Dict[str, Any]:
        report = covariance_check(f, cfg, tol)
        entry: Dict[str, Any] = {
            "status": verdict(report.passed),
            "transformation": f.describe(),
            "covariance": report.to_dict(),
            "symmetry": is_symmetry(f, b.taming, b.params.tol("field_tol")),
        }
        if b.lattice is not None and f.is_exact:
            entry["integral"] = is_integral_duality(f, b.lattice, b.sp)
        return entry

    def _exact_sequence(self, b) -> Dict[str, Any]:
        report = exact_sequence_check(
            b.target,
            b.transformations,
            b.taming,
            int(self.limits.get("conjugator_height", 2)),
            b.params.tol("field_tol"),
        )
        return {"status": verdict(report["ok"]), **report}
