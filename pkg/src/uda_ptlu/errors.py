"""Exception hierarchy shared by every module."""

from __future__ import annotations

from dataclasses import dataclass


class UDAError(Exception):
    """Base class for all library errors."""


@dataclass(frozen=True)
class Issue:
    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


class ValidationError(UDAError):
    """Raised when a class description violates one or more invariants.

    ``issues`` lists every violation found, not only the first one.
    """

    def __init__(self, issues: list[Issue]):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))

    @classmethod
    def single(cls, kind: str, message: str) -> ValidationError:
        return cls([Issue(kind, message)])

    @property
    def kinds(self) -> set[str]:
        return {i.kind for i in self.issues}


class NumericError(UDAError):
    """Base class for failures of a numerical computation (CLI exit code 2)."""


class ZeroEvidence(NumericError):
    pass


class UnknownPair(NumericError):
    pass


class TooLarge(NumericError):
    pass


class EmptyTargetSample(NumericError):
    pass


class WrongBase(NumericError):
    pass


class MissingEStar(NumericError):
    pass


class InconsistentClassifier(NumericError):
    pass


class NoMetric(NumericError):
    pass
