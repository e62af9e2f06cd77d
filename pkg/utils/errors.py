"""
Exception hierarchy for esmcheck.

Every error carries a short ``code`` that is echoed in reports, so a failing
check can be identified without parsing the message text.
"""

from typing import Any, Dict, Optional


class EsmError(Exception):
    """Base class for all esmcheck errors."""

    code = "EsmError"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Serializable form used in reports."""
        payload: Dict[str, Any] = {"error": self.code, "message": self.message}
        if self.details:
            payload["details"] = self.details
        return payload


class InputError(EsmError):
    """Malformed scenario or configuration (exit code 2)."""

    code = "InputError"


class ParseError(InputError):
    code = "ParseError"

    def __init__(self, message: str, location: str = "", details: Optional[Dict[str, Any]] = None):
        self.location = location
        full = f"{location}: {message}" if location else message
        super().__init__(full, details)


class MissingSection(InputError):
    code = "MissingSection"


class DimensionError(EsmError):
    code = "DimensionError"


# Tamings

class TamingError(EsmError):
    code = "TamingError"


class NotAlmostComplex(TamingError):
    code = "NotAlmostComplex"


class NotCompatible(TamingError):
    code = "NotCompatible"


class NotPositive(TamingError):
    code = "NotPositive"


# Lattices

class LatticeError(EsmError):
    code = "LatticeError"


class DegenerateLattice(LatticeError):
    code = "DegenerateLattice"


class NotIntegral(LatticeError):
    code = "NotIntegral"


class LatticeNotPreserved(LatticeError):
    code = "LatticeNotPreserved"


# Local systems

class SizeLimit(EsmError):
    code = "SizeLimit"


class PresentationMismatch(EsmError):
    code = "PresentationMismatch"


class RelationViolation(EsmError):
    code = "RelationViolation"


# Fields and grids

class GridTooCoarse(EsmError):
    code = "GridTooCoarse"


class SingularMetric(EsmError):
    code = "SingularMetric"


class SignatureError(EsmError):
    code = "SignatureError"


class NonGlobalSection(EsmError):
    code = "NonGlobalSection"


class CutCompatibilityError(EsmError):
    code = "CutCompatibilityError"


class PolarizationError(EsmError):
    code = "PolarizationError"


# Dualities

class EquivarianceViolation(EsmError):
    code = "EquivarianceViolation"


class IsometryViolation(EsmError):
    code = "IsometryViolation"


# Cohomology

class InvalidComplex(EsmError):
    code = "InvalidComplex"


class ComplexMismatch(EsmError):
    code = "ComplexMismatch"
