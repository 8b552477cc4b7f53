"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Optional


EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3


class DynRepSetError(Exception):
    exit_code = EXIT_USAGE


class UsageError(DynRepSetError):
    """Bad arguments: mixed semirings, out-of-range elements, unknown options."""


class ParseError(UsageError):
    def __init__(self, message: str, path: Optional[Path] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where = f"{where}{line}:"
        super().__init__(f"{where} {message}".strip() if where else message)


class ValidationError(UsageError):
    """Structurally invalid input (cycles, multiple sinks, bad arity)."""


class SkewnessError(ValidationError):
    def __init__(self, gate: object, message: str = ""):
        self.gate = gate
        super().__init__(message or f"gate {gate}: both operands of a mul gate have more than d monomials")


class ResourceError(DynRepSetError):
    exit_code = EXIT_RESOURCE


class ConstructionError(DynRepSetError):
    """A pseudo-random family could not be built within its iteration budget."""

    exit_code = EXIT_RESOURCE


class Verdict(str, Enum):
    """Outcome of an exhaustive check; SKIP means unverifiable at this scale."""

    PASS = "PASS"
    FAIL = "FAIL"
    SKIP = "SKIP"

    @classmethod
    def of(cls, ok: bool) -> "Verdict":
        return cls.PASS if ok else cls.FAIL
