import json

import pytest

from eqchain.cli import main


def run_cli(*argv) -> int:
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:  # argparse usage errors
        return exc.code


class TestConvert:
    def test_single_format(self, clean_corpus, tmp_path):
        out = tmp_path / "equation.jsonl"
        code = run_cli("convert", "--in", clean_corpus, "--format", "equation", "--out", out)
        assert code == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 50
        assert json.loads(lines[0])["format"] == "equation"

    def test_both_formats(self, clean_corpus, tmp_path):
        code = run_cli(
            "convert", "--in", clean_corpus, "--format", "both",
            "--out-natural", tmp_path / "nat.jsonl",
            "--out-equation", tmp_path / "eq.jsonl",
        )
        assert code == 0
        assert len((tmp_path / "nat.jsonl").read_text().splitlines()) == 50
        assert len((tmp_path / "eq.jsonl").read_text().splitlines()) == 50

    def test_dirty_corpus_writes_skips(self, dirty_corpus, tmp_path):
        out = tmp_path / "out.jsonl"
        assert run_cli("convert", "--in", dirty_corpus, "--format", "equation", "--out", out) == 0
        skips = (tmp_path / "out.jsonl.skips").read_text().splitlines()
        assert len(skips) == 11

    def test_strict_mode_exits_2(self, dirty_corpus, tmp_path):
        code = run_cli(
            "convert", "--in", dirty_corpus, "--format", "equation",
            "--out", tmp_path / "out.jsonl", "--strict",
        )
        assert code == 2

    def test_missing_input_file(self, tmp_path):
        code = run_cli(
            "convert", "--in", tmp_path / "nope.jsonl", "--format", "equation",
            "--out", tmp_path / "out.jsonl",
        )
        assert code == 1

    def test_missing_required_flag(self, clean_corpus):
        assert run_cli("convert", "--in", clean_corpus) == 1

    def test_unknown_subcommand(self):
        assert run_cli("frobnicate") == 1


class TestValidate:
    def test_clean(self, clean_corpus):
        assert run_cli("validate", "--in", clean_corpus) == 0

    def test_dirty_default_reports_but_passes(self, dirty_corpus, tmp_path):
        report = tmp_path / "failures.jsonl"
        code = run_cli("validate", "--in", dirty_corpus, "--report", report)
        assert code == 0
        kinds = {json.loads(line)["kind"] for line in report.read_text().splitlines()}
        assert "final-mismatch" in kinds
        assert "no-steps" in kinds

    def test_dirty_strict_exits_2(self, dirty_corpus):
        assert run_cli("validate", "--in", dirty_corpus, "--strict") == 2

    def test_clean_strict_passes(self, clean_corpus):
        assert run_cli("validate", "--in", clean_corpus, "--strict") == 0


@pytest.fixture
def scored_setup(clean_corpus, tmp_path):
    eq_out = tmp_path / "train.eq.jsonl"
    run_cli("convert", "--in", clean_corpus, "--format", "equation", "--out", eq_out)
    preds = tmp_path / "preds.jsonl"
    with open(preds, "w") as fh:
        for line in eq_out.read_text().splitlines():
            row = json.loads(line)
            fh.write(json.dumps({
                "id": row["id"], "generation": row["target"],
                "format": "equation", "model_label": "t5-tiny",
            }) + "\n")
    return preds


class TestScore:
    def test_self_score_and_verdicts(self, clean_corpus, tmp_path, scored_setup):
        verdicts = tmp_path / "verdicts.jsonl"
        code = run_cli(
            "score", "--pred", scored_setup, "--gold", clean_corpus, "--verdicts", verdicts,
        )
        assert code == 0
        rows = [json.loads(line) for line in verdicts.read_text().splitlines()]
        assert len(rows) == 50
        assert all(row["verdict"] == "correct" for row in rows)

    def test_table_needs_both_formats(self, clean_corpus, tmp_path, scored_setup):
        code = run_cli(
            "score", "--pred", scored_setup, "--gold", clean_corpus,
            "--table", tmp_path / "table.csv",
        )
        assert code == 1

    def test_table_two_runs(self, clean_corpus, tmp_path, scored_setup):
        nat_preds = tmp_path / "nat_preds.jsonl"
        with open(nat_preds, "w") as fh:
            for index in range(50):
                fh.write(json.dumps({
                    "id": str(index), "generation": "#### 0",
                    "format": "natural", "model_label": "t5-tiny",
                }) + "\n")
        table = tmp_path / "table.csv"
        code = run_cli(
            "score", "--pred", scored_setup, "--pred", nat_preds,
            "--gold", clean_corpus, "--table", table,
        )
        assert code == 0
        text = table.read_text()
        assert text.startswith("model,params,")
        assert "t5-tiny" in text

    def test_config_file_flags_win(self, clean_corpus, tmp_path, scored_setup):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "pred": [str(scored_setup)],
            "gold": str(clean_corpus),
            "tolerance": "0",
        }))
        # config alone supplies everything
        assert run_cli("--config", config, "score") == 0
        # a flag overrides the config's tolerance; bad value proves it was used
        assert run_cli("--config", config, "score", "--tolerance", "bogus") == 1


class TestAttn:
    def test_single_file_outputs(self, attn_tiny, tmp_path):
        scores = tmp_path / "scores.jsonl"
        entropy = tmp_path / "entropy.jsonl"
        heatmaps = tmp_path / "maps"
        code = run_cli(
            "attn", "--in", attn_tiny, "--pair", "times:*",
            "--scores-out", scores, "--entropy-out", entropy, "--heatmap-dir", heatmaps,
        )
        assert code == 0
        row = json.loads(scores.read_text())
        assert row["status"] == "ok"
        assert abs(row["score"] - 0.1) < 1e-12
        assert row["policy"] == "last-layer-mean"
        entropy_row = json.loads(entropy.read_text())
        assert len(entropy_row["per_row"]) == 2
        assert (heatmaps / "attn_tiny.csv").exists()

    def test_directory_input_and_default_pairs(self, fixtures_dir, tmp_path):
        scores = tmp_path / "scores.jsonl"
        code = run_cli("attn", "--in", fixtures_dir, "--scores-out", scores)
        assert code == 0
        rows = [json.loads(line) for line in scores.read_text().splitlines()]
        files = sorted({row["file"] for row in rows})
        assert files == ["attn_small.json", "attn_tiny.json"]
        # subword span ▁ti + mes in attn_small matches the builtin times:* pair
        small_times = [
            row for row in rows
            if row["file"] == "attn_small.json" and row["decoder_query"] == "*"
        ]
        assert small_times[0]["status"] == "ok"

    def test_not_found_recorded_not_zero(self, attn_tiny, tmp_path):
        scores = tmp_path / "scores.jsonl"
        run_cli("attn", "--in", attn_tiny, "--pair", "absent:*", "--scores-out", scores)
        row = json.loads(scores.read_text())
        assert row["status"] == "not-found"
        assert row["score"] is None

    def test_malformed_file_exits_1(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"encoder_tokens": ["a"]}))
        assert run_cli("attn", "--in", bad) == 1

    def test_mask_and_policy(self, attn_small, tmp_path):
        scores = tmp_path / "scores.jsonl"
        code = run_cli(
            "attn", "--in", attn_small, "--policy", "single:0,1",
            "--mask", "</s>", "--pair", "he:6", "--scores-out", scores,
        )
        assert code == 0
        row = json.loads(scores.read_text())
        assert row["policy"] == "single:0,1"


class TestStats:
    def test_stdout_json(self, clean_corpus, capsys):
        assert run_cli("stats", "--in", clean_corpus) == 0
        stats = json.loads(capsys.readouterr().out)
        assert stats["records"] == 50
        assert stats["convertible"] == 50
        assert stats["malformed_lines"] == 0
        assert sum(stats["step_histogram"].values()) == 50

    def test_out_file(self, dirty_corpus, tmp_path):
        out = tmp_path / "stats.json"
        assert run_cli("stats", "--in", dirty_corpus, "--out", out) == 0
        stats = json.loads(out.read_text())
        assert stats["malformed_lines"] == 4
        assert stats["parse_failures"] > 0
        assert stats["convertible"] == 2
