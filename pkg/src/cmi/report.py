"""Diagnostics produced by the model-language validators."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Severity(str, Enum):
    error = "error"
    warning = "warning"


class DiagCode(str, Enum):
    lex = "lex"
    parse = "parse"
    unsupported = "unsupported"
    edge_op_mismatch = "edge_op_mismatch"
    duplicate = "duplicate"
    dangling_ref = "dangling_ref"


# Statement-level recovery stops after this many errors; enough for a UI,
# bounded output.
MAX_ERRORS = 10


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    line: int
    column: int
    message: str
    code: DiagCode

    def format(self) -> str:
        return f"{self.line}:{self.column} {self.severity.value} [{self.code.value}] {self.message}"


@dataclass
class ValidationReport:
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(d.severity is Severity.error for d in self.diagnostics)

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity is Severity.error]

    @property
    def warnings(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity is Severity.warning]

    def error(self, line: int, column: int, message: str, code: DiagCode) -> None:
        if len(self.errors) < MAX_ERRORS:
            self.diagnostics.append(
                Diagnostic(Severity.error, line, column, message, code)
            )

    def warn(self, line: int, column: int, message: str, code: DiagCode) -> None:
        self.diagnostics.append(
            Diagnostic(Severity.warning, line, column, message, code)
        )

    def format(self) -> str:
        return "\n".join(d.format() for d in self.diagnostics)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "diagnostics": [
                {
                    "severity": d.severity.value,
                    "line": d.line,
                    "column": d.column,
                    "message": d.message,
                    "code": d.code.value,
                }
                for d in self.diagnostics
            ],
        }
