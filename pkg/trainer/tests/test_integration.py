"""Round trips against the companion converter/scorer/attention package.

This package talks to that one only through files, so these tests are
the contract check: everything written here must load there without
special cases.
"""

import json
import math
from fractions import Fraction

import pytest

eqchain = pytest.importorskip("eqchain")

from eqchain.attention import (
    DEFAULT_PAIRS,
    POLICY_ALL_MEAN,
    POLICY_LAST_LAYER_MEAN,
    SCORE_NOT_FOUND,
    SCORE_OK,
    aggregate_heads,
    attention_entropy,
    load_attention_map,
    pair_alignment_score,
)
from eqchain.convert import FORMAT_EQUATION, parse_equation_target
from eqchain.score import load_predictions, score_run
from eqchain.ingest import ProblemRecord, parse_rationale

from eqchain_trainer.export import export_attention
from eqchain_trainer.generate import greedy_generate, write_predictions


def records_for(rows) -> list[ProblemRecord]:
    """ProblemRecords whose gold answers come from the synthetic targets."""
    records = []
    for row in rows:
        rationale = parse_rationale(row["target"])
        gold = Fraction(rationale.final_answer_text)
        records.append(ProblemRecord(row["id"], row["source"], rationale, gold))
    return records


def test_synthetic_targets_parse_as_equation_chains(memorized_run):
    for row in memorized_run["rows"]:
        chain = parse_equation_target(row["target"])
        assert chain.steps


def test_memorized_predictions_score_perfectly(memorized_run, tmp_path):
    rows = memorized_run["rows"]
    generations = greedy_generate(
        memorized_run["model"], memorized_run["vocab"], [r["source"] for r in rows]
    )
    pred_path = tmp_path / "pred.jsonl"
    write_predictions(pred_path, [r["id"] for r in rows], generations, FORMAT_EQUATION, "toy")

    predictions = load_predictions(pred_path)
    report = score_run(predictions, records_for(rows))
    assert report.total == len(rows)
    assert report.accuracy == Fraction(1)


def test_exported_maps_satisfy_the_attention_contract(memorized_run, tmp_path):
    rows = memorized_run["rows"][:4]
    written = export_attention(
        memorized_run["model"],
        memorized_run["vocab"],
        [(r["id"], r["source"]) for r in rows],
        tmp_path,
        FORMAT_EQUATION,
        "toy",
    )
    for path in written:
        attention = load_attention_map(path)
        assert attention.renormalized_rows == 0
        for policy in (POLICY_LAST_LAYER_MEAN, POLICY_ALL_MEAN, (0, 0)):
            aggregated = aggregate_heads(attention, policy)
            summary = attention_entropy(aggregated)
            width = len(attention.encoder_tokens)
            assert all(0 <= h <= math.log(width) + 1e-9 for h in summary.per_row)
            for enc_query, dec_query in DEFAULT_PAIRS:
                score = pair_alignment_score(aggregated, enc_query, dec_query)
                if score.status == SCORE_OK:
                    assert 0 <= score.score <= 1
                else:
                    assert score.status == SCORE_NOT_FOUND
                    assert score.score is None


def test_exported_map_tokens_are_vocab_strings(memorized_run, tmp_path):
    row = memorized_run["rows"][0]
    written = export_attention(
        memorized_run["model"],
        memorized_run["vocab"],
        [(row["id"], row["source"])],
        tmp_path,
        FORMAT_EQUATION,
        "toy",
    )
    obj = json.loads(written[0].read_text(encoding="utf-8"))
    vocab_tokens = set(memorized_run["vocab"].tokens)
    assert set(obj["encoder_tokens"]) <= vocab_tokens
    assert set(obj["decoder_tokens"]) <= vocab_tokens
