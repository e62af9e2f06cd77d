"""
Deterministic report documents.

Reports are JSON with sorted keys, two-space indentation and floats rounded
to a fixed number of significant digits, so identical inputs give
byte-identical files.
"""

import hashlib
import json
import math
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Optional

import numpy as np
from sympy import Basic, MatrixBase, Rational

from utils.errors import EsmError

SCHEMA_VERSION = "1.0"
FLOAT_DIGITS = 12

STATUS_PASS = "pass"
STATUS_FAIL = "fail"
STATUS_INCONCLUSIVE = "inconclusive"


def conventions(kappa: float) -> Dict[str, Any]:
    """The convention block echoed in every report header."""
    return {
        "signature": "(-,+,+,+)",
        "epsilon_0123": 1,
        "omega_standard": "[[0, I], [-I, 0]]",
        "q_form": "Q = omega J (matrix form, omega(u, v) = v^T Omega u)",
        "hodge": "(*F)_{mn} = 1/2 sqrt|g| eps_{abmn} F^{ab}",
        "twisted_hodge": "J * hodge",
        "pairing_normalization": "1/2!",
        "kappa": kappa,
        "cochain_model": "cubical torus quotient",
        "finite_differences": "2nd order central, one-sided at non-periodic boundaries",
    }


def _round(value: float, digits: int) -> Any:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if value == 0.0:
        return 0.0
    return float(f"{value:.{digits}g}")


def normalize(obj: Any, digits: int = FLOAT_DIGITS) -> Any:
    """Convert numpy/sympy values to plain JSON values with rounded floats."""
    if isinstance(obj, dict):
        return {str(k): normalize(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v, digits) for v in obj]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(float(obj), digits)
    if isinstance(obj, np.ndarray):
        return normalize(obj.tolist(), digits)
    if isinstance(obj, MatrixBase):
        return [[normalize(x, digits) for x in row] for row in obj.tolist()]
    if isinstance(obj, Fraction):
        return int(obj) if obj.denominator == 1 else f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, Basic):
        if obj.is_Integer:
            return int(obj)
        if obj.is_Rational:
            r = Rational(obj)
            return f"{r.p}/{r.q}"
        if obj.is_number:
            return _round(float(obj), digits)
        return str(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(document: Dict[str, Any], digits: int = FLOAT_DIGITS) -> str:
    return json.dumps(normalize(document, digits), sort_keys=True, indent=2) + "\n"


def canonical_hash(document: Any) -> str:
    """sha256 of the canonical JSON form; independent of key order."""
    text = json.dumps(normalize(document), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def build_report(
    command: str,
    status: str,
    results: Dict[str, Any],
    scenario_hash: Optional[str],
    kappa: float,
    schema_version: str = SCHEMA_VERSION,
    timings: Optional[Dict[str, float]] = None,
) -> Dict[str, Any]:
    report = {
        "schema_version": schema_version,
        "command": command,
        "status": status,
        "scenario_hash": scenario_hash,
        "conventions": conventions(kappa),
        "results": results,
    }
    if timings is not None:
        report["timings"] = timings
    return report


def error_entry(error: Exception) -> Dict[str, Any]:
    """Report fragment for a failed check."""
    if isinstance(error, EsmError):
        return error.to_dict()
    return {"error": type(error).__name__, "message": str(error)}


def exit_code(status: str) -> int:
    return 0 if status == STATUS_PASS else 1
