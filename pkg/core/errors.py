"""
Exception hierarchy for the lab.

Every error raised by the numerical engine derives from LabError. Most also
derive from the matching builtin so callers that only know about ValueError or
IndexError keep working.
"""

from typing import Any, Dict, List, Optional


class LabError(Exception):
    """Base class for all lab errors."""


class DomainError(LabError, ValueError):
    """An argument lies outside the domain of an operation."""


class MeshMismatchError(LabError, ValueError):
    """Two densities were combined on different meshes."""


class SequenceExhaustedError(LabError, IndexError):
    """A map sequence has fewer entries than the requested steps."""


class ConvergenceError(LabError, RuntimeError):
    """A root iteration failed to converge."""


class DepthLimitError(LabError, ValueError):
    """The exact preimage-tree oracle was asked for too many levels."""


class InsufficientDataError(LabError, ValueError):
    """A regression window holds too few usable points."""


class MassMismatchError(LabError, ValueError):
    """Two densities that must share a mass do not."""


class ConeMembershipError(LabError, ValueError):
    """A density failed a cone membership check.

    Attributes:
        violations: Serialized violation reports from the failing check
    """

    def __init__(self, message: str, violations: Optional[List[Dict[str, Any]]] = None):
        super().__init__(message)
        self.violations = violations or []


class ConfigError(LabError, ValueError):
    """A run configuration failed validation.

    Attributes:
        field: Name of the offending field, if known
        line: 1-based line in the config file, if known
    """

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        location = ""
        if line is not None:
            location = f"line {line}: "
        elif field is not None:
            location = f"{field}: "
        super().__init__(f"{location}{message}")
        self.field = field
        self.line = line
