"""
Residuals command: evaluate the field equations on a scenario configuration.
"""

from typing import Any, Dict, List, Optional

from commands.base_command import BaseCommand, CommandResult, combine
from core.reports import STATUS_FAIL, STATUS_PASS
from core.scenario import Scenario
from theory.esm_residuals import convergence_order, residual_report
from utils.errors import ParseError

EQUATIONS = ("einstein", "scalar", "em", "polarization")


class ResidualsCommand(BaseCommand):
    """Residual norms of (g, phi, V), with an optional refinement study."""

    name = "residuals"

    def checked_equations(self, scenario: Scenario, polarized: bool) -> List[str]:
        """Equations that decide the status; polarization only counts for declared-polarized V."""
        section = scenario.data.get("residuals") or {}
        equations = section.get("equations")
        if equations is None:
            return [e for e in EQUATIONS if e != "polarization" or polarized]
        unknown = sorted(set(equations) - set(EQUATIONS))
        if unknown:
            raise ParseError(f"unknown equations {unknown}", "residuals.equations")
        return list(equations)

    def execute(self, scenario: Optional[Scenario]) -> CommandResult:
        scenario.section("spacetime")
        dump = bool(self.options.get("dump_fields"))
        factor = int(self.options.get("refine") or 1)

        b = self.builder(scenario)
        checked = self.checked_equations(scenario, b.declares_polarized)
        report = self.timed("residuals", residual_report, b.configuration)
        results: Dict[str, Any] = {"checked": checked, **report.to_dict(dump)}
        statuses = [STATUS_PASS if report.status[e] == "pass" else STATUS_FAIL for e in checked]

        if factor > 1:
            fine_builder = self.builder(scenario, refine=factor)
            fine = self.timed("residuals_refined", residual_report, fine_builder.configuration)
            results["refined"] = fine.to_dict(dump)
            results["refine_factor"] = factor
            results["convergence"] = {e: convergence_order(report, fine, factor, e) for e in EQUATIONS}
            statuses.extend(STATUS_PASS if fine.status[e] == "pass" else STATUS_FAIL for e in checked)

        return CommandResult(combine(*statuses), results)
