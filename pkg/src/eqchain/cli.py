"""Command-line front end.

Subcommands: convert, validate, score, attn, stats. Logs go to stderr;
data files carry no timestamps, so identical inputs produce identical
bytes. Exit codes: 0 success, 1 operational error (bad paths, bad
arguments, malformed inputs), 2 data failure under --strict.

Options may also come from a JSON config file (--config); explicit
flags win over config values.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import attention as attn_mod
from . import convert as convert_mod
from . import score as score_mod
from . import validate as validate_mod
from .errors import AttentionFormatError, EqChainError
from .ingest import BadLine, load_dataset, parse_rationale, write_bad_line_report

log = logging.getLogger("eqchain")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_STRICT = 2


class _Parser(argparse.ArgumentParser):
    # usage problems are operational errors, exit 1 not argparse's 2
    def error(self, message: str) -> "typing.NoReturn":  # type: ignore[name-defined]  # noqa: F821
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eqchain", description=__doc__)
    parser.add_argument("--config", help="JSON file of option defaults; flags win")
    parser.add_argument("-v", "--verbose", action="store_true", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p_convert = sub.add_parser("convert", help="emit training files from a corpus")
    p_convert.add_argument("--in", dest="input", help="corpus JSONL")
    p_convert.add_argument("--format", choices=("natural", "equation", "both"))
    p_convert.add_argument("--out", help="output path (single format)")
    p_convert.add_argument("--out-natural", help="output path for natural (with --format both)")
    p_convert.add_argument("--out-equation", help="output path for equation (with --format both)")
    p_convert.add_argument("--tolerance", help="step tolerance, exact rational (default 0)")
    p_convert.add_argument("--units", action="store_true", default=None,
                           help="accept currency symbols, commas, and %% inside expressions")
    p_convert.add_argument("--strict", action="store_true", default=None,
                           help="abort on the first unconvertible record")
    p_convert.set_defaults(func=cmd_convert)

    p_validate = sub.add_parser("validate", help="verify every annotation and chain")
    p_validate.add_argument("--in", dest="input", help="corpus JSONL")
    p_validate.add_argument("--report", help="failure report JSONL path")
    p_validate.add_argument("--bad-lines", help="malformed-line report JSONL path")
    p_validate.add_argument("--tolerance", help="step tolerance, exact rational (default 0)")
    p_validate.add_argument("--units", action="store_true", default=None)
    p_validate.add_argument("--strict", action="store_true", default=None,
                            help="exit 2 when any record fails")
    p_validate.set_defaults(func=cmd_validate)

    p_score = sub.add_parser("score", help="score generations against gold answers")
    p_score.add_argument("--pred", action="append", help="predictions JSONL (repeatable)")
    p_score.add_argument("--gold", help="gold corpus JSONL")
    p_score.add_argument("--format", choices=("natural", "equation"),
                         help="format for prediction files that omit it")
    p_score.add_argument("--label", help="model label when a prediction file omits it")
    p_score.add_argument("--tolerance", help="match tolerance (default 1e-6)")
    p_score.add_argument("--extraction", choices=score_mod.EXTRACTION_STRATEGIES)
    p_score.add_argument("--verdicts", help="per-record verdicts JSONL path")
    p_score.add_argument("--table", help="comparison table path (.csv for CSV, else text)")
    p_score.add_argument("--param-size", action="append", metavar="LABEL=SIZE",
                         help="parameter count for a label, e.g. t5-base=220M (repeatable)")
    p_score.set_defaults(func=cmd_score)

    p_attn = sub.add_parser("attn", help="pair-alignment scores and entropy from attention files")
    p_attn.add_argument("--in", dest="input", help="attention JSON file, or directory of them")
    p_attn.add_argument("--pair", action="append", metavar="ENC:DEC",
                        help="encoder query and decoder query (repeatable)")
    p_attn.add_argument("--policy", help="last-layer-mean | all-mean | single:L,H")
    p_attn.add_argument("--mask", help="comma-separated tokens to drop before scoring")
    p_attn.add_argument("--scores-out", help="pair score JSONL path")
    p_attn.add_argument("--entropy-out", help="entropy JSONL path")
    p_attn.add_argument("--heatmap-dir", help="directory for per-file CSV grids")
    p_attn.set_defaults(func=cmd_attn)

    p_stats = sub.add_parser("stats", help="corpus shape: counts, steps, target lengths")
    p_stats.add_argument("--in", dest="input", help="corpus JSONL")
    p_stats.add_argument("--out", help="JSON output path (stdout when omitted)")
    p_stats.set_defaults(func=cmd_stats)

    return parser


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise ValueError("config file must hold a JSON object")
    return config


def _resolve(args: argparse.Namespace, config: dict, name: str, default=None):
    value = getattr(args, name, None)
    if value is None:
        value = config.get(name, default)
    return value


def _fraction(value, name: str) -> Fraction:
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"--{name} must be an exact rational, got {value!r}") from exc


def _require(value, name: str):
    if value is None:
        raise ValueError(f"--{name} is required")
    return value


def _echo_options(command: str, options: dict) -> None:
    log.info("%s options: %s", command, json.dumps(options, sort_keys=True, default=str))


def cmd_convert(args: argparse.Namespace, config: dict) -> int:
    input_path = _require(_resolve(args, config, "input"), "in")
    fmt = _require(_resolve(args, config, "format"), "format")
    tolerance = _fraction(_resolve(args, config, "tolerance", "0"), "tolerance")
    units = bool(_resolve(args, config, "units", False))
    strict = bool(_resolve(args, config, "strict", False))
    if fmt == "both":
        outputs = {
            "natural": _require(_resolve(args, config, "out_natural"), "out-natural"),
            "equation": _require(_resolve(args, config, "out_equation"), "out-equation"),
        }
    else:
        outputs = {fmt: _require(_resolve(args, config, "out"), "out")}
    _echo_options("convert", {"in": input_path, "format": fmt, "tolerance": tolerance,
                              "units": units, "strict": strict, "out": outputs})

    records = load_dataset(input_path)
    for out_fmt, out_path in outputs.items():
        try:
            summary = convert_mod.emit_training_file(
                records, out_fmt, out_path,
                tolerance=tolerance, lenient_numbers=units, strict=strict,
            )
        except EqChainError as exc:
            log.error("strict conversion failed (%s): %s", out_fmt, exc)
            return EXIT_STRICT
        log.info("%s: wrote %d, skipped %d -> %s", out_fmt, summary.written, summary.skipped, out_path)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, config: dict) -> int:
    input_path = _require(_resolve(args, config, "input"), "in")
    tolerance = _fraction(_resolve(args, config, "tolerance", "0"), "tolerance")
    units = bool(_resolve(args, config, "units", False))
    strict = bool(_resolve(args, config, "strict", False))
    report_path = _resolve(args, config, "report")
    bad_lines_path = _resolve(args, config, "bad_lines")
    _echo_options("validate", {"in": input_path, "tolerance": tolerance, "units": units,
                               "strict": strict, "report": report_path})

    bad_lines: list[BadLine] = []
    records = load_dataset(input_path, bad_lines)
    report = validate_mod.validate_corpus(records, tolerance=tolerance, lenient_numbers=units)
    log.info(
        "%d/%d records valid; %d/%d annotations exact; %d malformed lines",
        report.valid, report.total, report.annotation_exact, report.annotation_total,
        len(bad_lines),
    )
    if report_path:
        validate_mod.write_failure_report(report.failures, report_path)
        log.info("failure report -> %s", report_path)
    if bad_lines_path:
        write_bad_line_report(bad_lines, bad_lines_path)
    if strict and (report.failures or bad_lines):
        log.error("strict validation failed: %d record failures, %d malformed lines",
                  len(report.failures), len(bad_lines))
        return EXIT_STRICT
    return EXIT_OK


def _parse_param_sizes(entries) -> dict[str, str]:
    sizes = {}
    for entry in entries or ():
        if isinstance(entry, str) and "=" in entry:
            label, size = entry.split("=", 1)
            sizes[label.strip()] = size.strip()
        else:
            raise ValueError(f"--param-size needs LABEL=SIZE, got {entry!r}")
    return sizes


def cmd_score(args: argparse.Namespace, config: dict) -> int:
    pred_paths = _require(_resolve(args, config, "pred"), "pred")
    if isinstance(pred_paths, str):
        pred_paths = [pred_paths]
    gold_path = _require(_resolve(args, config, "gold"), "gold")
    default_format = _resolve(args, config, "format")
    label = _resolve(args, config, "label")
    tolerance = _fraction(_resolve(args, config, "tolerance", "1e-6"), "tolerance")
    strategy = _resolve(args, config, "extraction", score_mod.EXTRACT_MARKER_THEN_FALLBACK)
    verdicts_path = _resolve(args, config, "verdicts")
    table_path = _resolve(args, config, "table")
    param_sizes = _parse_param_sizes(_resolve(args, config, "param_size"))
    if label is not None and len(pred_paths) > 1:
        raise ValueError("--label only applies to a single --pred file")
    _echo_options("score", {"pred": pred_paths, "gold": gold_path, "tolerance": tolerance,
                            "extraction": strategy, "label": label, "table": table_path})

    records = load_dataset(gold_path)
    reports = []
    for pred_path in pred_paths:
        predictions = score_mod.load_predictions(pred_path, default_format=default_format)
        report = score_mod.score_run(
            predictions, records, tolerance=tolerance, model_label=label, strategy=strategy,
        )
        log.info("%s: %s/%s accuracy %d/%d = %.4f",
                 pred_path, report.model_label or "?", report.format,
                 report.correct, report.total, float(report.accuracy))
        reports.append(report)
    if verdicts_path:
        score_mod.write_verdicts(reports, verdicts_path)
        log.info("verdicts -> %s", verdicts_path)
    if table_path:
        rows = score_mod.build_comparison_table(reports, param_sizes)
        text = score_mod.render_table_text(rows)
        for line in text.split("\n"):
            log.info("table | %s", line)
        if str(table_path).endswith(".csv"):
            rendered = score_mod.render_table_csv(rows)
        else:
            rendered = text + "\n"
        Path(table_path).write_text(rendered, encoding="utf-8")
        log.info("comparison table -> %s", table_path)
    return EXIT_OK


def _attention_inputs(input_path: str) -> list[Path]:
    path = Path(input_path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix == ".json")
        if not files:
            raise ValueError(f"no .json files in {path}")
        return files
    return [path]


def _parse_pairs(entries) -> list[tuple[str, str]]:
    if not entries:
        return [(enc, dec) for enc, dec in attn_mod.DEFAULT_PAIRS]
    pairs = []
    for entry in entries:
        if not isinstance(entry, str) or ":" not in entry:
            raise ValueError(f"--pair needs ENC:DEC, got {entry!r}")
        enc, dec = entry.split(":", 1)
        pairs.append((enc, dec))
    return pairs


def cmd_attn(args: argparse.Namespace, config: dict) -> int:
    input_path = _require(_resolve(args, config, "input"), "in")
    pairs = _parse_pairs(_resolve(args, config, "pair"))
    policy = attn_mod.parse_policy(_resolve(args, config, "policy", attn_mod.POLICY_LAST_LAYER_MEAN))
    mask_text = _resolve(args, config, "mask")
    scores_path = _resolve(args, config, "scores_out")
    entropy_path = _resolve(args, config, "entropy_out")
    heatmap_dir = _resolve(args, config, "heatmap_dir")
    _echo_options("attn", {"in": input_path, "pairs": pairs, "policy": policy,
                           "mask": mask_text, "scores_out": scores_path,
                           "entropy_out": entropy_path, "heatmap_dir": heatmap_dir})

    masked = {t for t in (mask_text or "").split(",") if t} or None
    score_rows = []
    entropy_rows = []
    for file_path in _attention_inputs(input_path):
        try:
            raw = attn_mod.load_attention_map(file_path)
            aggregated = attn_mod.aggregate_heads(raw, policy)
            if masked:
                aggregated = attn_mod.mask_tokens(aggregated, masked)
        except AttentionFormatError as exc:
            log.error("%s", exc)
            return EXIT_ERROR
        base = {
            "file": file_path.name,
            "record_id": aggregated.record_id,
            "model_label": aggregated.model_label,
            "format": aggregated.format,
            "policy": aggregated.policy,
        }
        for enc_query, dec_query in pairs:
            pair = attn_mod.pair_alignment_score(aggregated, enc_query, dec_query)
            score_rows.append(dict(base, encoder_query=enc_query, decoder_query=dec_query,
                                   score=pair.score, status=pair.status,
                                   encoder_indices=list(pair.encoder_indices),
                                   decoder_indices=list(pair.decoder_indices)))
            log.info("%s: %s -> %s: %s", file_path.name, enc_query, dec_query,
                     "not-found" if pair.score is None else f"{pair.score:.6f}")
        entropy = attn_mod.attention_entropy(aggregated)
        entropy_rows.append(dict(base, mean_entropy=entropy.mean,
                                 per_row=list(entropy.per_row)))
        log.info("%s: mean row entropy %.6f nats", file_path.name, entropy.mean)
        if heatmap_dir:
            out_dir = Path(heatmap_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            grid_path = out_dir / f"{file_path.stem}.csv"
            attn_mod.emit_heatmap_grid(aggregated, grid_path)
    if scores_path:
        _write_jsonl(score_rows, scores_path)
        log.info("pair scores -> %s", scores_path)
    if entropy_path:
        _write_jsonl(entropy_rows, entropy_path)
        log.info("entropy -> %s", entropy_path)
    return EXIT_OK


def _write_jsonl(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def cmd_stats(args: argparse.Namespace, config: dict) -> int:
    input_path = _require(_resolve(args, config, "input"), "in")
    out_path = _resolve(args, config, "out")
    _echo_options("stats", {"in": input_path, "out": out_path})

    bad_lines: list[BadLine] = []
    records = load_dataset(input_path, bad_lines)
    step_histogram: dict[str, int] = {}
    natural_lengths = []
    equation_lengths = []
    parse_failures = 0
    convertible = 0
    for record in records:
        try:
            rationale = parse_rationale(record.rationale)
        except EqChainError:
            parse_failures += 1
            continue
        steps = len(rationale.annotations)
        step_histogram[str(steps)] = step_histogram.get(str(steps), 0) + 1
        try:
            chain = convert_mod.to_equation_chain(rationale)
        except EqChainError:
            continue
        if not chain.consistent:
            continue
        convertible += 1
        natural_lengths.append(len(convert_mod.render_natural_target(rationale)))
        equation_lengths.append(len(convert_mod.render_equation_target(chain)))

    def distribution(lengths: list[int]) -> dict:
        if not lengths:
            return {"count": 0}
        return {
            "count": len(lengths),
            "min": min(lengths),
            "max": max(lengths),
            "mean": round(sum(lengths) / len(lengths), 2),
        }

    stats = {
        "records": len(records),
        "malformed_lines": len(bad_lines),
        "parse_failures": parse_failures,
        "convertible": convertible,
        "step_histogram": dict(sorted(step_histogram.items(), key=lambda kv: int(kv[0]))),
        "natural_target_length": distribution(natural_lengths),
        "equation_target_length": distribution(equation_lengths),
    }
    rendered = json.dumps(stats, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(rendered, encoding="utf-8")
        log.info("stats -> %s", out_path)
    else:
        sys.stdout.write(rendered)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = {}
    try:
        config = _load_config(args.config)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"eqchain: error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_ERROR
    verbose = _resolve(args, config, "verbose", False)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args, config)
    except EqChainError as exc:
        log.error("%s", exc)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
