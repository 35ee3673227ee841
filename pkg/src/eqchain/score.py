"""Scoring model generations against gold answers, per target format.

Extraction follows the corpus convention: the answer is the first
number after the last ``####`` marker. Generations that drop the marker
fall back to format-aware heuristics, and every scored record gets an
explicit verdict so accuracy is auditable.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .engine import normalize_number, parse_expression, render_rational, within_tolerance
from .errors import (
    DuplicatePredictionError,
    EqChainError,
    MissingFormatError,
    NumberFormatError,
    UnresolvedPredictionError,
)
from .ingest import FINAL_MARKER, ProblemRecord

log = logging.getLogger(__name__)

EXTRACT_MARKER_THEN_FALLBACK = "marker-then-fallback"
EXTRACT_MARKER_ONLY = "marker-only"
EXTRACT_LAST_NUMBER = "last-number"
EXTRACTION_STRATEGIES = (
    EXTRACT_MARKER_THEN_FALLBACK,
    EXTRACT_MARKER_ONLY,
    EXTRACT_LAST_NUMBER,
)

VERDICT_CORRECT = "correct"
VERDICT_INCORRECT = "incorrect"
VERDICT_MISSING = "missing-prediction"
VERDICT_NO_ANSWER = "no-answer-extracted"
VERDICT_NO_GOLD = "no-gold-answer"

# Candidate numeric tokens inside free text; trailing sentence periods
# stay out because the fractional part requires a digit.
_NUMBER_PATTERN = re.compile(r"[-+]?[$€£¥₩]?(?:\d[\d,]*(?:\.\d+)?|\.\d+)%?")

DEFAULT_TOLERANCE = Fraction(1, 10**6)

DEFAULT_PARAM_SIZES = {
    "t5-base": "220M",
    "t5-small": "60M",
    "t5-mini": "31M",
    "t5-tiny": "16M",
}


@dataclass(frozen=True)
class PredictionRecord:
    id: str
    generation: str
    format: str
    model_label: str | None = None


def _first_number(text: str) -> Fraction | None:
    for match in _NUMBER_PATTERN.finditer(text):
        try:
            return normalize_number(match.group())
        except NumberFormatError:
            continue
    return None


def _last_number(text: str) -> Fraction | None:
    result = None
    for match in _NUMBER_PATTERN.finditer(text):
        try:
            result = normalize_number(match.group())
        except NumberFormatError:
            continue
    return result


def _last_equation_value(text: str) -> Fraction | None:
    # rightmost line that looks like "expr=value" with both sides sound
    for line in reversed(text.split("\n")):
        if line.count("=") != 1:
            continue
        expr_text, value_text = line.split("=")
        try:
            parse_expression(expr_text, lenient_numbers=True)
            return normalize_number(value_text.strip())
        except EqChainError:
            continue
    return None


def extract_predicted_answer(
    text: str,
    fmt: str,
    strategy: str = EXTRACT_MARKER_THEN_FALLBACK,
) -> Fraction | None:
    """Pull the final answer out of a generation; None when no answer
    can be found under the chosen strategy.

    A present-but-numberless marker is a model failure, not a cue to go
    hunting elsewhere, so it yields None except under ``last-number``.
    """
    if strategy not in EXTRACTION_STRATEGIES:
        raise ValueError(f"unknown extraction strategy: {strategy!r}")
    if strategy == EXTRACT_LAST_NUMBER:
        return _last_number(text)
    marker = text.rfind(FINAL_MARKER)
    if marker != -1:
        return _first_number(text[marker + len(FINAL_MARKER) :])
    if strategy == EXTRACT_MARKER_ONLY:
        return None
    if fmt == "equation":
        value = _last_equation_value(text)
        if value is not None:
            return value
    return _last_number(text)


def answers_match(
    predicted: Fraction | None,
    gold: Fraction,
    tolerance: Fraction = DEFAULT_TOLERANCE,
) -> bool:
    if predicted is None:
        return False
    return within_tolerance(predicted, gold, tolerance)


@dataclass(frozen=True)
class RecordVerdict:
    id: str
    predicted: Fraction | None
    gold: Fraction | None
    verdict: str


@dataclass
class ScoreReport:
    model_label: str | None
    format: str
    total: int
    correct: int
    verdicts: list[RecordVerdict] = field(default_factory=list)

    @property
    def accuracy(self) -> Fraction:
        if self.total == 0:
            return Fraction(0)
        return Fraction(self.correct, self.total)


def score_run(
    predictions: list[PredictionRecord],
    records: list[ProblemRecord],
    tolerance: Fraction = DEFAULT_TOLERANCE,
    model_label: str | None = None,
    strategy: str = EXTRACT_MARKER_THEN_FALLBACK,
) -> ScoreReport:
    """Score one model's generations for one format against a corpus.

    Every gold record is counted: a record without a prediction scores
    as incorrect with an explicit verdict. Duplicate prediction ids and
    predictions for unknown ids are hard errors because they signal a
    broken join, not a bad model.
    """
    if not predictions:
        raise ValueError("no predictions to score")
    formats = {p.format for p in predictions}
    if len(formats) > 1:
        raise ValueError(f"mixed formats in one run: {sorted(formats)}")
    fmt = formats.pop()
    if model_label is None:
        labels = {p.model_label for p in predictions if p.model_label is not None}
        if len(labels) == 1:
            model_label = labels.pop()
        elif len(labels) > 1:
            raise ValueError(f"mixed model labels in one run: {sorted(labels)}")

    by_id: dict[str, PredictionRecord] = {}
    for prediction in predictions:
        if prediction.id in by_id:
            raise DuplicatePredictionError(prediction.id)
        by_id[prediction.id] = prediction
    known_ids = {r.id for r in records}
    for prediction_id in by_id:
        if prediction_id not in known_ids:
            raise UnresolvedPredictionError(prediction_id)

    report = ScoreReport(model_label=model_label, format=fmt, total=len(records), correct=0)
    for record in records:
        prediction = by_id.get(record.id)
        if prediction is None:
            report.verdicts.append(RecordVerdict(record.id, None, record.gold_answer, VERDICT_MISSING))
            continue
        if record.gold_answer is None:
            report.verdicts.append(RecordVerdict(record.id, None, None, VERDICT_NO_GOLD))
            continue
        predicted = extract_predicted_answer(prediction.generation, fmt, strategy=strategy)
        if predicted is None:
            verdict = VERDICT_NO_ANSWER
        elif answers_match(predicted, record.gold_answer, tolerance):
            verdict = VERDICT_CORRECT
            report.correct += 1
        else:
            verdict = VERDICT_INCORRECT
        report.verdicts.append(RecordVerdict(record.id, predicted, record.gold_answer, verdict))
    log.info(
        "scored %s/%s: %d/%d correct",
        model_label or "?",
        fmt,
        report.correct,
        report.total,
    )
    return report


def load_predictions(path: str | Path, default_format: str | None = None) -> list[PredictionRecord]:
    """Read predictions from JSON lines: id, generation, format, and an
    optional model_label. ``default_format`` fills records that omit the
    format field."""
    predictions = []
    with open(path, encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {index + 1}: invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict) or "id" not in obj or "generation" not in obj:
                raise ValueError(f"{path}: line {index + 1}: need 'id' and 'generation' fields")
            fmt = obj.get("format", default_format)
            if fmt is None:
                raise ValueError(f"{path}: line {index + 1}: no format and no default given")
            predictions.append(
                PredictionRecord(
                    id=str(obj["id"]),
                    generation=str(obj["generation"]),
                    format=fmt,
                    model_label=obj.get("model_label"),
                )
            )
    return predictions


def write_verdicts(reports: ScoreReport | list[ScoreReport], path: str | Path) -> None:
    if isinstance(reports, ScoreReport):
        reports = [reports]

    def fmt_value(value: Fraction | None) -> str | None:
        return None if value is None else render_rational(value)

    with open(path, "w", encoding="utf-8") as fh:
        for report in reports:
            for verdict in report.verdicts:
                fh.write(
                    json.dumps(
                        {
                            "id": verdict.id,
                            "model_label": report.model_label,
                            "format": report.format,
                            "predicted": fmt_value(verdict.predicted),
                            "gold": fmt_value(verdict.gold),
                            "verdict": verdict.verdict,
                        }
                    )
                    + "\n"
                )


_PARAM_SUFFIXES = {"K": 10**3, "M": 10**6, "B": 10**9}


def parse_param_count(size_text: str) -> int:
    """'220M' -> 220000000; bare digit strings pass through."""
    text = size_text.strip()
    if not text:
        raise ValueError("empty parameter size")
    suffix = text[-1].upper()
    if suffix in _PARAM_SUFFIXES:
        base = Fraction(text[:-1])
        count = base * _PARAM_SUFFIXES[suffix]
    else:
        count = Fraction(text)
    if count.denominator != 1 or count <= 0:
        raise ValueError(f"parameter size must be a positive whole count: {size_text!r}")
    return int(count)


@dataclass(frozen=True)
class TableRow:
    model_label: str
    param_size_text: str
    param_count: int
    natural_accuracy: Fraction
    equation_accuracy: Fraction

    @property
    def delta(self) -> Fraction:
        return self.equation_accuracy - self.natural_accuracy


def build_comparison_table(
    reports: list[ScoreReport],
    param_sizes: dict[str, str] | None = None,
) -> list[TableRow]:
    """Pair each model's natural and equation runs into one row.

    Rows are ordered by descending parameter count. A model missing one
    of the two formats cannot be compared and raises.
    """
    sizes = dict(DEFAULT_PARAM_SIZES)
    if param_sizes:
        sizes.update(param_sizes)
    by_model: dict[str, dict[str, ScoreReport]] = {}
    for report in reports:
        if report.model_label is None:
            raise ValueError("comparison rows need a model label on every report")
        slot = by_model.setdefault(report.model_label, {})
        if report.format in slot:
            raise ValueError(f"two {report.format} reports for model {report.model_label!r}")
        slot[report.format] = report

    rows = []
    for label, slot in by_model.items():
        for fmt in ("natural", "equation"):
            if fmt not in slot:
                raise MissingFormatError(label, fmt)
        if label not in sizes:
            raise ValueError(f"no parameter size known for model {label!r}")
        rows.append(
            TableRow(
                model_label=label,
                param_size_text=sizes[label],
                param_count=parse_param_count(sizes[label]),
                natural_accuracy=slot["natural"].accuracy,
                equation_accuracy=slot["equation"].accuracy,
            )
        )
    rows.sort(key=lambda r: (-r.param_count, r.model_label))
    return rows


def _pct(value: Fraction, signed: bool = False) -> str:
    pattern = "+.2f" if signed else ".2f"
    return format(float(value) * 100, pattern) + "%"


def _dec(value: Fraction, signed: bool = False) -> str:
    pattern = "+.4f" if signed else ".4f"
    return format(float(value), pattern)


def render_table_text(rows: list[TableRow]) -> str:
    headers = ("model", "params", "natural", "equation", "delta")
    cells = [
        (
            row.model_label,
            row.param_size_text,
            _pct(row.natural_accuracy),
            _pct(row.equation_accuracy),
            _pct(row.delta, signed=True),
        )
        for row in rows
    ]
    widths = [max(len(h), *(len(c[i]) for c in cells)) if cells else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    for cell in cells:
        lines.append("  ".join(cell[i].ljust(widths[i]) for i in range(len(headers))))
    return "\n".join(lines)


def render_table_csv(rows: list[TableRow]) -> str:
    import io

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        [
            "model",
            "params",
            "natural_accuracy",
            "equation_accuracy",
            "delta",
            "natural_pct",
            "equation_pct",
            "delta_pct",
        ]
    )
    for row in rows:
        writer.writerow(
            [
                row.model_label,
                row.param_size_text,
                _dec(row.natural_accuracy),
                _dec(row.equation_accuracy),
                _dec(row.delta, signed=True),
                _pct(row.natural_accuracy),
                _pct(row.equation_accuracy),
                _pct(row.delta, signed=True),
            ]
        )
    return buffer.getvalue()
