"""Conversion of parsed rationales into training targets.

Two target formats:

* ``equation``: one canonical ``expr=value`` line per verified step,
  then a final ``#### value`` line. Values are recomputed exactly, so
  emitting requires every step to verify.
* ``natural``: the rationale prose with the ``<<...>>`` regions removed
  and everything else byte for byte, final ``####`` line included.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .engine import (
    Expr,
    check_annotation,
    evaluate,
    normalize_number,
    parse_expression,
    render_expression,
    render_rational,
    within_tolerance,
)
from .errors import NumberFormatError, RationaleParseError, StepVerificationError
from .ingest import FINAL_MARKER, ProblemRecord, Rationale, parse_rationale

log = logging.getLogger(__name__)

FORMAT_NATURAL = "natural"
FORMAT_EQUATION = "equation"
FORMATS = (FORMAT_NATURAL, FORMAT_EQUATION)

# Chain-consistency flags
FLAG_CONSISTENT = "consistent"
FLAG_FINAL_MISMATCH = "final-mismatch"
FLAG_NO_STEPS = "no-steps"


@dataclass(frozen=True)
class ChainStep:
    expr: Expr
    value: Fraction


@dataclass(frozen=True)
class EquationChain:
    """All verified steps of one rationale plus the gold final answer.

    ``flag`` records chain-level consistency: the last step's value must
    equal the ``####`` answer exactly, and a chain with no steps cannot
    support the equation format.
    """

    steps: tuple[ChainStep, ...]
    final_answer: Fraction
    flag: str

    @property
    def consistent(self) -> bool:
        return self.flag == FLAG_CONSISTENT


def to_equation_chain(
    rationale: Rationale,
    tolerance: Fraction = Fraction(0),
    lenient_numbers: bool = False,
) -> EquationChain:
    """Verify every annotation and assemble the equation chain.

    Raises :class:`StepVerificationError` on the first step whose
    claimed value does not match the computed one (or fails to parse);
    raises :class:`NumberFormatError` when the ``####`` answer is not
    numeric. Chain-level issues are flagged, not raised.
    """
    steps = []
    for annotation in rationale.annotations:
        check = check_annotation(annotation, tolerance=tolerance, lenient_numbers=lenient_numbers)
        if not check.passed:
            raise StepVerificationError(
                annotation.step_index, annotation.expr_text, check.verdict, check.detail
            )
        steps.append(ChainStep(expr=check.expr, value=check.computed))
    final_answer = normalize_number(rationale.final_answer_text)
    if not steps:
        flag = FLAG_NO_STEPS
    elif steps[-1].value == final_answer:
        flag = FLAG_CONSISTENT
    else:
        flag = FLAG_FINAL_MISMATCH
    return EquationChain(steps=tuple(steps), final_answer=final_answer, flag=flag)


def render_equation_target(chain: EquationChain) -> str:
    """Canonical equation-only text: steps re-rendered from their parse
    trees with recomputed values, then the final marker line."""
    lines = [
        f"{render_expression(step.expr)}={render_rational(step.value)}" for step in chain.steps
    ]
    lines.append(f"{FINAL_MARKER} {render_rational(chain.final_answer)}")
    return "\n".join(lines)


def render_natural_target(rationale: Rationale) -> str:
    """Prose with annotation regions deleted; everything else verbatim."""
    return "".join(segment for segment, _ in rationale.steps)


@dataclass(frozen=True)
class TrainingExample:
    id: str
    source: str
    target: str
    format: str


@dataclass(frozen=True)
class SkipRecord:
    id: str
    reason: str


@dataclass
class EmitSummary:
    written: int = 0
    skipped: int = 0
    skips: list[SkipRecord] = field(default_factory=list)


def convert_record(
    record: ProblemRecord,
    fmt: str,
    tolerance: Fraction = Fraction(0),
    lenient_numbers: bool = False,
) -> TrainingExample:
    """Build one training example, or raise with a skip-worthy error.

    Both formats demand a fully verified, consistent chain so the two
    training sets cover identical records.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown format: {fmt!r}")
    rationale = parse_rationale(record.rationale)
    chain = to_equation_chain(rationale, tolerance=tolerance, lenient_numbers=lenient_numbers)
    if not chain.consistent:
        raise StepVerificationError(
            len(chain.steps) - 1 if chain.steps else 0,
            "",
            chain.flag,
            f"chain flagged {chain.flag}",
        )
    if fmt == FORMAT_EQUATION:
        target = render_equation_target(chain)
    else:
        target = render_natural_target(rationale)
    return TrainingExample(id=record.id, source=record.question, target=target, format=fmt)


def skip_reason(exc: Exception) -> str:
    """Stable machine tag for why a record was skipped."""
    if isinstance(exc, RationaleParseError):
        return exc.kind
    if isinstance(exc, StepVerificationError):
        return exc.verdict
    if isinstance(exc, NumberFormatError):
        return "bad-final-answer"
    raise exc


def emit_training_file(
    records: list[ProblemRecord],
    fmt: str,
    path: str | Path,
    tolerance: Fraction = Fraction(0),
    lenient_numbers: bool = False,
    strict: bool = False,
) -> EmitSummary:
    """Write training examples as JSON lines; unconvertible records go
    to a ``<path>.skips`` report unless ``strict`` (then the first
    failure propagates)."""
    path = Path(path)
    summary = EmitSummary()
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            try:
                example = convert_record(
                    record, fmt, tolerance=tolerance, lenient_numbers=lenient_numbers
                )
            except (RationaleParseError, StepVerificationError, NumberFormatError) as exc:
                if strict:
                    raise
                reason = skip_reason(exc)
                log.warning("record %s skipped: %s", record.id, reason)
                summary.skipped += 1
                summary.skips.append(SkipRecord(record.id, reason))
                continue
            fh.write(
                json.dumps(
                    {
                        "id": example.id,
                        "source": example.source,
                        "target": example.target,
                        "format": example.format,
                    }
                )
                + "\n"
            )
            summary.written += 1
    if summary.skips:
        write_skip_report(summary.skips, f"{path}.skips")
    return summary


def write_skip_report(skips: list[SkipRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for skip in skips:
            fh.write(json.dumps({"id": skip.id, "reason": skip.reason}) + "\n")


def parse_equation_target(text: str) -> EquationChain:
    """Strict reader for the equation format, mainly for round-trip
    checks: every line before the marker must be ``expr=value`` with a
    parseable expression, and the marker line must be last."""
    lines = text.split("\n")
    if not lines or not lines[-1].startswith(FINAL_MARKER):
        raise ValueError("equation target must end with a final marker line")
    final_answer = normalize_number(lines[-1][len(FINAL_MARKER) :].strip())
    steps = []
    for line in lines[:-1]:
        if line.count("=") != 1:
            raise ValueError(f"step line needs exactly one '=': {line!r}")
        expr_text, value_text = line.split("=")
        expr = parse_expression(expr_text)
        value = normalize_number(value_text)
        if evaluate(expr) != value:
            raise ValueError(f"step line does not verify: {line!r}")
        steps.append(ChainStep(expr=expr, value=value))
    if not steps:
        flag = FLAG_NO_STEPS
    elif steps[-1].value == final_answer:
        flag = FLAG_CONSISTENT
    else:
        flag = FLAG_FINAL_MISMATCH
    return EquationChain(steps=tuple(steps), final_answer=final_answer, flag=flag)


def chain_answers_match(chain: EquationChain, tolerance: Fraction) -> bool:
    """Whether the last step's value matches the final answer within
    tolerance (exactness is already captured by the flag)."""
    if not chain.steps:
        return False
    return within_tolerance(chain.steps[-1].value, chain.final_answer, tolerance)
