import json
from fractions import Fraction

import pytest

from eqchain.convert import convert_record
from eqchain.errors import (
    DuplicatePredictionError,
    MissingFormatError,
    UnresolvedPredictionError,
)
from eqchain.ingest import ProblemRecord, load_dataset
from eqchain.score import (
    PredictionRecord,
    ScoreReport,
    answers_match,
    build_comparison_table,
    extract_predicted_answer,
    load_predictions,
    parse_param_count,
    render_table_csv,
    render_table_text,
    score_run,
    write_verdicts,
)


class TestExtraction:
    def test_marker_takes_first_number_after_last_marker(self):
        text = "#### 5 draft\nreal answer\n#### 72 footnote 99"
        assert extract_predicted_answer(text, "natural") == 72

    def test_marker_number_variants(self):
        assert extract_predicted_answer("#### 1,200", "natural") == 1200
        assert extract_predicted_answer("#### $35", "natural") == 35
        assert extract_predicted_answer("#### -4.5", "natural") == Fraction(-9, 2)

    def test_numberless_marker_means_no_answer(self):
        assert extract_predicted_answer("3+4=7\n#### nope", "equation") is None

    def test_equation_fallback_uses_last_step(self):
        text = "48/2=24\n48+24=72"
        assert extract_predicted_answer(text, "equation") == 72

    def test_equation_fallback_skips_unparseable_lines(self):
        text = "48/2=24\ngarbage=line=here\nnot math at all"
        assert extract_predicted_answer(text, "equation") == 24

    def test_natural_fallback_takes_last_number(self):
        assert extract_predicted_answer("maybe 7, maybe 9", "natural") == 9

    def test_marker_only_strategy(self):
        assert extract_predicted_answer("it is 9", "natural", strategy="marker-only") is None
        assert extract_predicted_answer("#### 9", "natural", strategy="marker-only") == 9

    def test_last_number_strategy_ignores_marker(self):
        assert extract_predicted_answer("#### 9 or 10", "natural", strategy="last-number") == 10

    def test_unknown_strategy_rejected(self):
        with pytest.raises(ValueError):
            extract_predicted_answer("x", "natural", strategy="best-guess")

    def test_empty_generation(self):
        assert extract_predicted_answer("", "natural") is None


class TestAnswersMatch:
    def test_exact_by_default_tolerance(self):
        assert answers_match(Fraction(72), Fraction(72))
        assert not answers_match(Fraction(71), Fraction(72))

    def test_tolerance_scales_with_gold(self):
        assert answers_match(Fraction(1000001, 1000), Fraction(1000), Fraction(1, 10**6))

    def test_none_never_matches(self):
        assert not answers_match(None, Fraction(0))


def _records(answers: dict[str, int]) -> list[ProblemRecord]:
    return [
        ProblemRecord(id=key, question="q", rationale="r", gold_answer=Fraction(value))
        for key, value in answers.items()
    ]


class TestScoreRun:
    def test_counts_and_verdicts(self):
        records = _records({"a": 1, "b": 2, "c": 3})
        predictions = [
            PredictionRecord("a", "#### 1", "natural"),
            PredictionRecord("b", "#### 5", "natural"),
        ]
        report = score_run(predictions, records)
        assert report.total == 3
        assert report.correct == 1
        assert report.accuracy == Fraction(1, 3)
        verdicts = {v.id: v.verdict for v in report.verdicts}
        assert verdicts == {"a": "correct", "b": "incorrect", "c": "missing-prediction"}

    def test_duplicate_ids_rejected(self):
        records = _records({"a": 1})
        predictions = [
            PredictionRecord("a", "#### 1", "natural"),
            PredictionRecord("a", "#### 1", "natural"),
        ]
        with pytest.raises(DuplicatePredictionError):
            score_run(predictions, records)

    def test_unknown_ids_rejected(self):
        with pytest.raises(UnresolvedPredictionError):
            score_run([PredictionRecord("zz", "#### 1", "natural")], _records({"a": 1}))

    def test_mixed_formats_rejected(self):
        records = _records({"a": 1, "b": 2})
        predictions = [
            PredictionRecord("a", "#### 1", "natural"),
            PredictionRecord("b", "#### 2", "equation"),
        ]
        with pytest.raises(ValueError):
            score_run(predictions, records)

    def test_model_label_from_predictions(self):
        records = _records({"a": 1})
        report = score_run([PredictionRecord("a", "#### 1", "natural", "t5-tiny")], records)
        assert report.model_label == "t5-tiny"

    def test_self_scoring_clean_corpus(self, clean_corpus):
        records = load_dataset(clean_corpus)
        for fmt in ("natural", "equation"):
            predictions = [
                PredictionRecord(r.id, convert_record(r, fmt).target, fmt) for r in records
            ]
            report = score_run(predictions, records, tolerance=Fraction(0))
            assert report.accuracy == 1

    def test_verdict_file(self, tmp_path):
        records = _records({"a": 1})
        report = score_run([PredictionRecord("a", "#### 1", "natural", "m")], records)
        path = tmp_path / "verdicts.jsonl"
        write_verdicts(report, path)
        row = json.loads(path.read_text())
        assert row == {
            "id": "a",
            "model_label": "m",
            "format": "natural",
            "predicted": "1",
            "gold": "1",
            "verdict": "correct",
        }


class TestLoadPredictions:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_text(
            json.dumps({"id": 3, "generation": "#### 1", "format": "natural"}) + "\n"
        )
        predictions = load_predictions(path)
        assert predictions[0].id == "3"
        assert predictions[0].format == "natural"

    def test_default_format(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_text(json.dumps({"id": "a", "generation": "x"}) + "\n")
        assert load_predictions(path, default_format="equation")[0].format == "equation"
        with pytest.raises(ValueError):
            load_predictions(path)

    def test_malformed_line_names_position(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_text("not json\n")
        with pytest.raises(ValueError, match="line 1"):
            load_predictions(path)


class TestParamCount:
    @pytest.mark.parametrize(
        "text, expected",
        [("220M", 220_000_000), ("60m", 60_000_000), ("1.5B", 1_500_000_000),
         ("16K", 16_000), ("12345", 12_345)],
    )
    def test_parse(self, text, expected):
        assert parse_param_count(text) == expected

    @pytest.mark.parametrize("text", ["", "big", "-3M", "0.5"])
    def test_reject(self, text):
        with pytest.raises(ValueError):
            parse_param_count(text)


def _report(label: str, fmt: str, correct: int, total: int = 100) -> ScoreReport:
    return ScoreReport(model_label=label, format=fmt, total=total, correct=correct)


class TestComparisonTable:
    def test_rows_ordered_by_descending_params(self):
        reports = [
            _report("t5-tiny", "natural", 7), _report("t5-tiny", "equation", 10),
            _report("t5-base", "natural", 13), _report("t5-base", "equation", 17),
            _report("t5-mini", "natural", 8), _report("t5-mini", "equation", 11),
            _report("t5-small", "natural", 10), _report("t5-small", "equation", 14),
        ]
        rows = build_comparison_table(reports)
        assert [r.model_label for r in rows] == ["t5-base", "t5-small", "t5-mini", "t5-tiny"]
        assert [r.delta for r in rows] == [
            Fraction(4, 100), Fraction(4, 100), Fraction(3, 100), Fraction(3, 100),
        ]

    def test_missing_format_raises(self):
        with pytest.raises(MissingFormatError):
            build_comparison_table([_report("t5-base", "natural", 13)])

    def test_unknown_label_needs_size(self):
        reports = [_report("mymodel", "natural", 1), _report("mymodel", "equation", 2)]
        with pytest.raises(ValueError):
            build_comparison_table(reports)
        rows = build_comparison_table(reports, {"mymodel": "42M"})
        assert rows[0].param_count == 42_000_000

    def test_renderers(self):
        reports = [
            _report("t5-base", "natural", 13), _report("t5-base", "equation", 17),
        ]
        rows = build_comparison_table(reports)
        text = render_table_text(rows)
        assert "t5-base" in text and "13.00%" in text and "+4.00%" in text
        csv_text = render_table_csv(rows)
        header, row = csv_text.strip().split("\n")
        assert header.startswith("model,params,")
        assert "0.1300" in row and "0.1700" in row and "+0.0400" in row
