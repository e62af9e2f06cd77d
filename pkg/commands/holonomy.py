"""
Holonomy command: monodromy, commutant and lattice data of a scenario.
"""

from typing import Any, Dict, Optional

import numpy as np

from algebra.local_system import (
    Word,
    commutant_basis,
    holonomy_sample,
    is_trivializable,
    is_unitary_holonomy,
    lattice_monodromy,
    preserves_lattice,
    reduced_words,
    transport_lattice,
)
from commands.base_command import BaseCommand, CommandResult, combine
from core.reports import STATUS_PASS
from core.scenario import Scenario
from theory.quantization import torus_transport


class HolonomyCommand(BaseCommand):
    """Holonomy sample, commutant dimension, triviality and lattice type."""

    name = "holonomy"

    def execute(self, scenario: Optional[Scenario]) -> CommandResult:
        b = self.builder(scenario)
        max_len = int(self.options.get("max_len") or self.limits.get("holonomy_max_len", 4))
        max_size = int(self.limits.get("holonomy_max_size", 10000))

        results: Dict[str, Any] = {"max_len": max_len}
        results["holonomy"] = self.guarded("holonomy", self._holonomy, b, max_len, max_size)
        results["triviality"] = self.guarded("triviality", self._triviality, b)
        results["unitary"] = self.guarded("unitary", self._unitary, b)
        statuses = [results[k]["status"] for k in ("holonomy", "triviality", "unitary")]
        if b.lattice is not None:
            results["lattice"] = self.guarded("lattice", self._lattice, b, max_len)
            statuses.append(results["lattice"]["status"])
        return CommandResult(combine(*statuses), results)

    def _holonomy(self, b, max_len: int, max_size: int) -> Dict[str, Any]:
        sample = holonomy_sample(b.monodromy, max_len, max_size)
        commutant = commutant_basis(b.monodromy)
        return {
            "status": STATUS_PASS,
            "sample_size": len(sample),
            "commutant_dimension": commutant.dimension,
            "generators": {name: img for name, img in zip(b.presentation.generators, b.monodromy.images)},
        }

    def _triviality(self, b) -> Dict[str, Any]:
        result = is_trivializable(b.monodromy)
        return {"status": STATUS_PASS, "verdict": result.kind, "witness": result.witness}

    def _unitary(self, b) -> Dict[str, Any]:
        j0 = b.taming.at(np.zeros(b.target.dim))
        return {"status": STATUS_PASS, "unitary_holonomy": is_unitary_holonomy(b.monodromy, j0)}

    def _lattice(self, b, max_len: int) -> Dict[str, Any]:
        rep, lat = b.monodromy, b.lattice
        preserved = preserves_lattice(rep, lat)
        out: Dict[str, Any] = {
            "status": STATUS_PASS,
            "type": list(lat.type_divisors),
            "preserved": preserved,
        }
        if not preserved:
            return out
        out["lattice_monodromy"] = lattice_monodromy(rep, lat)
        types = {tuple(transport_lattice(rep, lat, w).type_divisors) for w in reduced_words(rep.presentation.rank, min(max_len, 2))}
        out["type_invariant"] = types == {tuple(lat.type_divisors)}
        j0 = b.taming.at(np.zeros(b.target.dim))
        out["torus_transport"] = [
            torus_transport(rep, lat, j0, Word.generator(g), b.params.tol("field_tol"))
            for g in range(rep.presentation.rank)
        ]
        return out
