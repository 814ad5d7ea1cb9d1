"""Structured check reports shared by the validation routines and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Issue:
    code: str
    message: str

    def to_json(self) -> dict:
        return {"code": self.code, "message": self.message}


@dataclass
class Report:
    """An empty report means the check passed."""

    title: str = ""
    issues: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def add(self, code: str, message: str) -> None:
        self.issues.append(Issue(code, message))

    def extend(self, other: "Report") -> None:
        self.issues.extend(other.issues)

    def codes(self) -> list[str]:
        return [i.code for i in self.issues]

    def __bool__(self) -> bool:
        return self.ok

    def to_json(self) -> dict:
        return {"title": self.title, "ok": self.ok, "issues": [i.to_json() for i in self.issues]}

    def __str__(self) -> str:
        if self.ok:
            return f"{self.title}: ok"
        lines = [f"{self.title}: {len(self.issues)} issue(s)"]
        lines += [f"  [{i.code}] {i.message}" for i in self.issues]
        return "\n".join(lines)
