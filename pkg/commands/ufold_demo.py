"""
U-fold demo: the bundled parabolic-monodromy scenario, checked end to end.
"""

from typing import Any, Dict, Optional

from sympy import ImmutableMatrix

from algebra.local_system import VerdictKind, is_trivializable
from commands.base_command import BaseCommand, CommandResult, combine, verdict
from commands.duality import DualityCommand
from commands.quantize import QuantizeCommand
from commands.residuals import ResidualsCommand
from commands.validate import ValidateCommand
from core.builders import load_bundled
from core.reports import STATUS_FAIL, STATUS_PASS
from core.scenario import Scenario
from theory.duality_action import is_integral_duality


class UfoldDemoCommand(BaseCommand):
    """Witnesses a duality structure without global duality frames and runs every check on it."""

    name = "ufold-demo"
    needs_scenario = False

    def execute(self, scenario: Optional[Scenario]) -> CommandResult:
        scenario = scenario or load_bundled("ufold")
        b = self.builder(scenario)
        results: Dict[str, Any] = {"scenario": scenario.name, "scenario_hash": scenario.scenario_hash}

        results["triviality"] = self.guarded("triviality", self._triviality, b)
        statuses = [results["triviality"]["status"]]
        for sub in (ValidateCommand, ResidualsCommand, DualityCommand, QuantizeCommand):
            command = sub(self.config, self.logger, self.options)
            outcome = command.run(scenario)
            results[command.name] = {"status": outcome.status, "results": outcome.results}
            statuses.append(outcome.status)
            self._timings.update({f"{command.name}.{k}": v for k, v in outcome.timings.items()})

        if b.lattice is not None:
            results["integral_dualities"] = self.guarded("integral_dualities", self._integral, b)
            statuses.append(results["integral_dualities"]["status"])
        return CommandResult(combine(*statuses), results)

    def _triviality(self, b) -> Dict[str, Any]:
        rep = b.monodromy
        actual = is_trivializable(rep)
        flipped = is_trivializable(rep.with_images([ImmutableMatrix.eye(rep.dim)] * rep.presentation.rank))
        passed = actual.kind == VerdictKind.NONTRIVIAL and flipped.kind == VerdictKind.TRIVIAL
        return {
            "status": verdict(passed),
            "verdict": actual.kind,
            "witness": actual.witness,
            "identity_monodromy_verdict": flipped.kind,
        }

    def _integral(self, b) -> Dict[str, Any]:
        members = [
            f.describe() for f in b.transformations
            if f.is_exact and is_integral_duality(f, b.lattice, b.sp)
        ]
        return {"status": STATUS_PASS if members else STATUS_FAIL, "members": members}
