"""
Quantize command: twisted Dirac quantization of the field strength.
"""

from typing import Any, Dict, Optional

from commands.base_command import BaseCommand, CommandResult, combine, verdict
from core.reports import STATUS_PASS
from core.scenario import Scenario
from theory.quantization import (
    TwistedCellComplex,
    euler_characteristic,
    grid_complex,
    quantization_check,
    twisted_cohomology,
)


class QuantizeCommand(BaseCommand):
    """Integrates V over the cubical torus cells and tests integrality."""

    name = "quantize"

    def execute(self, scenario: Optional[Scenario]) -> CommandResult:
        scenario.section("spacetime")
        b = self.builder(scenario)
        complex_ = self.timed("complex", grid_complex, b.grid, b.target)
        rank_tol = b.params.tol("rank_tol")
        cohomology = {
            str(k): twisted_cohomology(complex_, k, "real", rank_tol).to_dict()
            for k in range(complex_.top + 1)
        }
        results: Dict[str, Any] = {
            "cells": [complex_.count(k) for k in range(complex_.top + 1)],
            "euler_characteristic": euler_characteristic(complex_),
            "cohomology": cohomology,
        }
        statuses = []
        if complex_.rep.lattice is not None and complex_.rep.exact:
            results["integer_cohomology"] = self.guarded("integer_cohomology", self._integer_cohomology, complex_)
            statuses.append(results["integer_cohomology"]["status"])
        check = self.guarded("quantization", self._check, b.two_form, complex_, b.params.tol("quantization_tol"))
        results["quantization"] = check
        statuses.append(check["status"])
        return CommandResult(combine(*statuses), results)

    @staticmethod
    def _integer_cohomology(complex_: TwistedCellComplex) -> Dict[str, Any]:
        groups = {str(k): twisted_cohomology(complex_, k, "integer").to_dict() for k in range(complex_.top + 1)}
        return {"status": STATUS_PASS, "groups": groups}

    @staticmethod
    def _check(v, complex_, tol: float) -> Dict[str, Any]:
        result = quantization_check(v, complex_, tol)
        return {"status": verdict(result.passed), **result.to_dict()}
