"""Exception types raised across the package.

Every failure a caller might want to branch on gets its own class; pure
data problems (a wrong claimed value in an annotation, a missing
prediction) are reported as values, not exceptions.
"""

from __future__ import annotations


class EqChainError(Exception):
    """Base class for all package errors."""


class NumberFormatError(EqChainError):
    """A string could not be normalized into an exact rational."""

    def __init__(self, text: str, reason: str):
        super().__init__(f"cannot parse number {text!r}: {reason}")
        self.text = text
        self.reason = reason


class ExpressionSyntaxError(EqChainError):
    """An arithmetic expression failed to parse. Carries the character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.message = message
        self.position = position


class DivisionByZeroError(EqChainError):
    """Exact evaluation hit a zero divisor."""

    def __init__(self, subexpression: str):
        super().__init__(f"division by zero in {subexpression!r}")
        self.subexpression = subexpression


class RationaleParseError(EqChainError):
    """A rationale's annotation or final-answer structure is malformed.

    ``kind`` is a stable machine-readable tag; ``offset`` is the character
    position the failure is anchored to.
    """

    def __init__(self, kind: str, offset: int, detail: str = ""):
        message = f"{kind} at offset {offset}"
        if detail:
            message += f": {detail}"
        super().__init__(message)
        self.kind = kind
        self.offset = offset
        self.detail = detail


class StepVerificationError(EqChainError):
    """An annotation failed verification while building an equation chain."""

    def __init__(self, step_index: int, expr_text: str, verdict: str, detail: str):
        super().__init__(f"step {step_index} ({expr_text!r}): {verdict}: {detail}")
        self.step_index = step_index
        self.expr_text = expr_text
        self.verdict = verdict
        self.detail = detail


class DuplicatePredictionError(EqChainError):
    """Two predictions claim the same record id; the run is ambiguous."""

    def __init__(self, record_id: str):
        super().__init__(f"duplicate prediction id {record_id!r}")
        self.record_id = record_id


class UnresolvedPredictionError(EqChainError):
    """A prediction id does not join to any gold record."""

    def __init__(self, record_id: str):
        super().__init__(f"prediction id {record_id!r} matches no gold record")
        self.record_id = record_id


class MissingFormatError(EqChainError):
    """A comparison table needs one report per format for every model."""

    def __init__(self, model_label: str, fmt: str):
        super().__init__(f"model {model_label!r} has no report for format {fmt!r}")
        self.model_label = model_label
        self.format = fmt


class AttentionFormatError(EqChainError):
    """An attention interchange file violates its schema or invariants."""
