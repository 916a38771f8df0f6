"""Source spans and diagnostics shared by the spec and scenario front ends."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class SourceSpan:
    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __post_init__(self) -> None:
        if (self.start_line, self.start_col) > (self.end_line, self.end_col):
            raise ValueError(f"span start after end: {self}")

    def __str__(self) -> str:
        return f"{self.file}:{self.start_line}:{self.start_col}"

    def to(self, other: Optional["SourceSpan"]) -> "SourceSpan":
        """Span covering ``self`` through ``other``."""
        if other is None:
            return self
        return SourceSpan(self.file, self.start_line, self.start_col,
                          other.end_line, other.end_col)


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    span: Optional[SourceSpan] = None

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span is not None else ""
        return f"{where}{self.severity.value}[{self.code}]: {self.message}"

    def to_json(self) -> dict:
        out = {"severity": self.severity.value, "code": self.code,
               "message": self.message, "span": None}
        if self.span is not None:
            s = self.span
            out["span"] = {"file": s.file, "start": [s.start_line, s.start_col],
                           "end": [s.end_line, s.end_col]}
        return out


def error(code: str, message: str, span: Optional[SourceSpan] = None) -> Diagnostic:
    return Diagnostic(Severity.ERROR, code, message, span)


def warning(code: str, message: str, span: Optional[SourceSpan] = None) -> Diagnostic:
    return Diagnostic(Severity.WARNING, code, message, span)


class ParseError(Exception):
    """Raised when a spec or scenario cannot be turned into a model.

    Carries every diagnostic collected before giving up; at least one of them
    is an error.
    """

    def __init__(self, diagnostics: Iterable[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


def has_errors(diagnostics: Iterable[Diagnostic]) -> bool:
    return any(d.is_error for d in diagnostics)
