"""
Scenario files: YAML documents describing a structure and a configuration.

Exact numbers are YAML integers or "p/q" strings; matrices are row-major
nested lists. Every parse failure carries the dotted location of the
offending entry.
"""

import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import yaml
from sympy import ImmutableMatrix, Matrix, Rational, SympifyError, sympify

from core.reports import canonical_hash
from utils.errors import MissingSection, ParseError


@dataclass(frozen=True)
class Scenario:
    """A parsed scenario document with its content hash."""

    data: Dict[str, Any]
    scenario_hash: str
    name: str = "scenario"
    path: Optional[str] = field(default=None, compare=False)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], name: str = "scenario", path: Optional[str] = None) -> "Scenario":
        if not isinstance(data, dict):
            raise ParseError("scenario must be a mapping", "<root>")
        return cls(data, canonical_hash(data), str(data.get("name", name)), path)

    def has(self, key: str) -> bool:
        return key in self.data and self.data[key] is not None

    def section(self, key: str) -> Any:
        """
        Raises:
            MissingSection
        """
        if not self.has(key):
            raise MissingSection(f"scenario has no '{key}' section", {"section": key})
        return self.data[key]


def load_scenario(path: str) -> Scenario:
    """
    Read a scenario file.

    Raises:
        ParseError: unreadable file or malformed YAML
    """
    if not os.path.exists(path):
        raise ParseError(f"scenario file not found: {path}", "<file>")
    try:
        with open(path, "r", encoding="utf-8") as file:
            data = yaml.safe_load(file)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        location = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "<yaml>"
        raise ParseError(f"malformed YAML: {getattr(e, 'problem', e)}", location) from e
    name = os.path.splitext(os.path.basename(path))[0]
    return Scenario.from_dict(data, name, path)


# Field parsers

def require(mapping: Any, key: str, location: str) -> Any:
    if not isinstance(mapping, dict):
        raise ParseError("expected a mapping", location)
    if key not in mapping:
        raise ParseError(f"missing key '{key}'", location)
    return mapping[key]


def parse_exact(value: Any, location: str) -> Rational:
    """Integer or "p/q" string as an exact rational."""
    if isinstance(value, bool):
        raise ParseError("expected a number", location)
    if isinstance(value, int):
        return Rational(value)
    if isinstance(value, str):
        try:
            parsed = Rational(value.strip())
        except (TypeError, ValueError, SympifyError) as e:
            raise ParseError(f"'{value}' is not an exact number", location) from e
        return parsed
    raise ParseError(f"expected an integer or 'p/q' string, got {value!r}", location)


def parse_scalar(value: Any, location: str) -> Any:
    """Exact rational when possible, otherwise a float."""
    if isinstance(value, float):
        return value
    return parse_exact(value, location)


def parse_float(value: Any, location: str) -> float:
    if isinstance(value, bool):
        raise ParseError("expected a number", location)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(sympify(value))
        except (SympifyError, TypeError, ValueError) as e:
            raise ParseError(f"'{value}' is not a number", location) from e
    raise ParseError(f"expected a number, got {value!r}", location)


def parse_int(value: Any, location: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"expected an integer, got {value!r}", location)
    if minimum is not None and value < minimum:
        raise ParseError(f"must be at least {minimum}", location)
    return value


def parse_list(value: Any, location: str, length: Optional[int] = None) -> List[Any]:
    if not isinstance(value, (list, tuple)):
        raise ParseError("expected a list", location)
    if length is not None and len(value) != length:
        raise ParseError(f"expected {length} entries, got {len(value)}", location)
    return list(value)


def parse_matrix(value: Any, location: str, shape: Optional[Sequence[int]] = None) -> Any:
    """
    Row-major matrix; exact entries give an ImmutableMatrix, any float entry
    gives a numpy array.
    """
    rows = parse_list(value, location, shape[0] if shape else None)
    entries = []
    for i, row in enumerate(rows):
        row = parse_list(row, f"{location}[{i}]", shape[1] if shape else None)
        entries.append([parse_scalar(x, f"{location}[{i}][{j}]") for j, x in enumerate(row)])
    if entries and len({len(r) for r in entries}) != 1:
        raise ParseError("rows have different lengths", location)
    if any(isinstance(x, float) for r in entries for x in r):
        return np.array([[float(x) for x in r] for r in entries])
    return ImmutableMatrix(Matrix(entries))


def parse_expression(value: Any, location: str, local_names: Dict[str, Any]) -> Any:
    """sympy expression from a number or string in the given symbols."""
    if isinstance(value, bool):
        raise ParseError("expected an expression", location)
    try:
        expr = sympify(value, locals=local_names)
    except (SympifyError, TypeError, SyntaxError) as e:
        raise ParseError(f"cannot parse expression {value!r}", location) from e
    unknown = {str(s) for s in expr.free_symbols} - set(local_names)
    if unknown:
        raise ParseError(f"unknown symbols {sorted(unknown)}", location)
    return expr
