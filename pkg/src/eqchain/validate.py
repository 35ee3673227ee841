"""Corpus-wide verification of calculator annotations and chains.

Validation never stops at the first problem: every record contributes
either to the valid count or to a failure list with a machine-readable
kind, so corpus health is a single report.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .convert import FLAG_CONSISTENT, to_equation_chain
from .engine import check_annotation
from .errors import NumberFormatError, RationaleParseError, StepVerificationError
from .ingest import ProblemRecord, parse_rationale

log = logging.getLogger(__name__)

# Failure kinds, beyond the rationale-parse kinds reused verbatim
KIND_BAD_FINAL = "bad-final-answer"
KIND_STEP_MISMATCH = "step-mismatch"
KIND_STEP_EVAL_ERROR = "step-eval-error"
KIND_FINAL_MISMATCH = "final-mismatch"
KIND_NO_STEPS = "no-steps"


@dataclass(frozen=True)
class Failure:
    record_id: str
    kind: str
    detail: str = ""


@dataclass
class ValidationReport:
    """Aggregate result of validating a corpus.

    ``annotation_total`` and ``annotation_exact`` count individual
    calculator steps across all parseable rationales, independent of
    whether their records end up valid.
    """

    total: int = 0
    valid: int = 0
    failures: list[Failure] = field(default_factory=list)
    annotation_total: int = 0
    annotation_exact: int = 0

    @property
    def annotation_exact_rate(self) -> Fraction:
        if self.annotation_total == 0:
            return Fraction(0)
        return Fraction(self.annotation_exact, self.annotation_total)

    @property
    def valid_rate(self) -> Fraction:
        if self.total == 0:
            return Fraction(0)
        return Fraction(self.valid, self.total)

    def failure_ids(self) -> set[str]:
        return {f.record_id for f in self.failures}


def validate_record(
    record: ProblemRecord,
    tolerance: Fraction = Fraction(0),
    lenient_numbers: bool = False,
    report: ValidationReport | None = None,
) -> list[Failure]:
    """All failures for one record; empty means the record is valid.

    Per-annotation checks run for every step even after one fails, so a
    rationale with two bad steps reports both.
    """
    failures: list[Failure] = []
    try:
        rationale = parse_rationale(record.rationale)
    except RationaleParseError as exc:
        return [Failure(record.id, exc.kind, f"offset {exc.offset}")]

    for annotation in rationale.annotations:
        check = check_annotation(annotation, tolerance=tolerance, lenient_numbers=lenient_numbers)
        if report is not None:
            report.annotation_total += 1
            if check.verdict == "exact-match":
                report.annotation_exact += 1
        if check.verdict == "mismatch":
            failures.append(
                Failure(record.id, KIND_STEP_MISMATCH, f"step {annotation.step_index}: {check.detail}")
            )
        elif check.verdict == "eval-error":
            failures.append(
                Failure(record.id, KIND_STEP_EVAL_ERROR, f"step {annotation.step_index}: {check.detail}")
            )

    try:
        chain = to_equation_chain(rationale, tolerance=tolerance, lenient_numbers=lenient_numbers)
    except StepVerificationError:
        # already reported per annotation above
        return failures
    except NumberFormatError as exc:
        failures.append(Failure(record.id, KIND_BAD_FINAL, str(exc)))
        return failures
    if chain.flag != FLAG_CONSISTENT:
        failures.append(Failure(record.id, chain.flag, ""))
    return failures


def validate_corpus(
    records: list[ProblemRecord],
    tolerance: Fraction = Fraction(0),
    lenient_numbers: bool = False,
) -> ValidationReport:
    report = ValidationReport()
    for record in records:
        report.total += 1
        failures = validate_record(
            record, tolerance=tolerance, lenient_numbers=lenient_numbers, report=report
        )
        if failures:
            report.failures.extend(failures)
        else:
            report.valid += 1
    log.info(
        "validated %d records: %d valid, %d failures, %d/%d annotations exact",
        report.total,
        report.valid,
        len(report.failures),
        report.annotation_exact,
        report.annotation_total,
    )
    return report


def write_failure_report(failures: list[Failure], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for failure in failures:
            fh.write(
                json.dumps({"id": failure.record_id, "kind": failure.kind, "detail": failure.detail})
                + "\n"
            )
