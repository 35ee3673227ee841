"""Loading and parsing of grade-school math corpora.

A corpus is a line-delimited UTF-8 file of JSON objects with string
fields ``question`` and ``answer``. Answers carry inline calculator
annotations ``<<expr=value>>`` and end with a ``#### <number>`` line
giving the gold final answer.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .engine import normalize_number
from .errors import EqChainError, NumberFormatError, RationaleParseError

log = logging.getLogger(__name__)

FINAL_MARKER = "####"

# Machine-readable kinds for RationaleParseError
PARSE_UNTERMINATED = "unterminated-annotation"
PARSE_NESTED = "nested-annotation"
PARSE_MISSING_EQUALS = "annotation-missing-equals"
PARSE_EXTRA_EQUALS = "annotation-extra-equals"
PARSE_MISSING_FINAL = "missing-final-marker"


@dataclass(frozen=True)
class Annotation:
    """One calculator step ``<<expr=claimed>>`` with its source span."""

    expr_text: str
    claimed_text: str
    start: int  # offset of "<<"
    end: int  # offset just past ">>"
    step_index: int

    def source_text(self, rationale_text: str) -> str:
        return rationale_text[self.start : self.end]


@dataclass(frozen=True)
class Rationale:
    """A parsed rationale: prose segments interleaved with annotations.

    ``steps`` holds (segment, annotation) pairs where the segment is the
    text preceding the annotation; the last pair carries the trailing
    text and no annotation. Concatenating segments and annotation source
    texts reconstructs the input byte for byte.
    """

    text: str
    steps: tuple[tuple[str, Annotation | None], ...]
    final_answer_text: str

    @property
    def annotations(self) -> tuple[Annotation, ...]:
        return tuple(a for _, a in self.steps if a is not None)

    def reconstruct(self) -> str:
        parts = []
        for segment, annotation in self.steps:
            parts.append(segment)
            if annotation is not None:
                parts.append(annotation.source_text(self.text))
        return "".join(parts)


@dataclass(frozen=True)
class ProblemRecord:
    """One dataset item. ``gold_answer`` is None when the rationale has
    no parseable ``####`` answer; validation reports those."""

    id: str
    question: str
    rationale: str
    gold_answer: Fraction | None


@dataclass(frozen=True)
class BadLine:
    """A corpus line that could not become a record."""

    line_number: int  # 1-based
    reason: str


def parse_rationale(text: str) -> Rationale:
    """Split a rationale into prose segments and calculator annotations.

    Raises :class:`RationaleParseError` for an unterminated ``<<``, a
    nested ``<<``, an annotation whose body does not contain exactly one
    ``=``, or a missing ``####`` marker.
    """
    steps: list[tuple[str, Annotation | None]] = []
    pos = 0
    step_index = 0
    while True:
        start = text.find("<<", pos)
        if start == -1:
            break
        close = text.find(">>", start + 2)
        if close == -1:
            raise RationaleParseError(PARSE_UNTERMINATED, start)
        body = text[start + 2 : close]
        inner_open = body.find("<<")
        if inner_open != -1:
            raise RationaleParseError(PARSE_NESTED, start + 2 + inner_open)
        equals = body.count("=")
        if equals == 0:
            raise RationaleParseError(PARSE_MISSING_EQUALS, start)
        if equals > 1:
            raise RationaleParseError(PARSE_EXTRA_EQUALS, start)
        expr_text, claimed_text = body.split("=")
        annotation = Annotation(expr_text, claimed_text, start, close + 2, step_index)
        steps.append((text[pos:start], annotation))
        pos = close + 2
        step_index += 1
    steps.append((text[pos:], None))

    marker = text.rfind(FINAL_MARKER)
    if marker == -1:
        raise RationaleParseError(PARSE_MISSING_FINAL, len(text))
    final_answer_text = text[marker + len(FINAL_MARKER) :].strip()
    return Rationale(text=text, steps=tuple(steps), final_answer_text=final_answer_text)


def extract_final_answer(rationale: Rationale) -> Fraction:
    """Normalized gold answer from the ``####`` line.

    Raises :class:`NumberFormatError` when the text after the marker is
    not numeric.
    """
    return normalize_number(rationale.final_answer_text)


def load_dataset(path: str | Path, bad_lines: list[BadLine] | None = None) -> list[ProblemRecord]:
    """Load a line-delimited corpus into records, in file order.

    Ids come from an ``id`` field when present, else the zero-based line
    index, so joins against prediction files are reproducible. Malformed
    lines are excluded, logged, and appended to ``bad_lines`` when a
    collector is passed; processing continues.
    """
    records: list[ProblemRecord] = []
    with open(path, encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            stripped = line.strip()
            reason = None
            obj = None
            if not stripped:
                reason = "blank line"
            else:
                try:
                    obj = json.loads(stripped)
                except json.JSONDecodeError as exc:
                    reason = f"invalid JSON: {exc.msg}"
            if obj is not None and reason is None:
                if not isinstance(obj, dict):
                    reason = "not an object"
                elif not isinstance(obj.get("question"), str) or not isinstance(
                    obj.get("answer"), str
                ):
                    reason = "missing string fields 'question' and 'answer'"
                elif not obj["question"].strip():
                    reason = "empty question"
                elif not obj["answer"].strip():
                    reason = "empty answer"
            if reason is not None:
                log.warning("line %d skipped: %s", index + 1, reason)
                if bad_lines is not None:
                    bad_lines.append(BadLine(index + 1, reason))
                continue
            record_id = str(obj["id"]) if "id" in obj else str(index)
            records.append(
                ProblemRecord(
                    id=record_id,
                    question=obj["question"],
                    rationale=obj["answer"],
                    gold_answer=_try_gold_answer(obj["answer"]),
                )
            )
    return records


def _try_gold_answer(rationale_text: str) -> Fraction | None:
    try:
        return extract_final_answer(parse_rationale(rationale_text))
    except (RationaleParseError, NumberFormatError):
        return None


def write_bad_line_report(bad_lines: list[BadLine], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for bad in bad_lines:
            fh.write(json.dumps({"line": bad.line_number, "reason": bad.reason}) + "\n")
