"""Command line front end: train, generate, export-attn.

Defaults come from the packaged defaults.json; any flag given on the
command line overrides the packaged value. Exit code 0 on success,
1 on any error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

log = logging.getLogger("eqchain_trainer")


def load_defaults() -> dict:
    text = resources.files("eqchain_trainer").joinpath("defaults.json").read_text("utf-8")
    return json.loads(text)


class _Parser(argparse.ArgumentParser):
    # usage errors should exit 1 like every other failure, not argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser(defaults: dict) -> _Parser:
    parser = _Parser(prog="eqchain-trainer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    train_p = sub.add_parser("train", help="fine-tune a model on a training file")
    train_p.add_argument("--train-file", required=True)
    train_p.add_argument("--out-dir", required=True)
    train_p.add_argument("--arch", default=defaults["arch"])
    train_p.add_argument("--epochs", type=int, default=defaults["epochs"])
    train_p.add_argument("--batch-size", type=int, default=defaults["batch_size"])
    train_p.add_argument("--learning-rate", type=float, default=defaults["learning_rate"])
    train_p.add_argument("--seed", type=int, default=defaults["seed"])
    train_p.add_argument("--max-source-len", type=int, default=defaults["max_source_len"])
    train_p.add_argument("--max-target-len", type=int, default=defaults["max_target_len"])
    train_p.add_argument("--max-steps", type=int, default=None)
    train_p.add_argument("--limit", type=int, default=None)

    gen_p = sub.add_parser("generate", help="greedy-decode predictions for a record file")
    gen_p.add_argument("--model-dir", required=True)
    gen_p.add_argument("--in", dest="in_file", required=True)
    gen_p.add_argument("--out", required=True)
    gen_p.add_argument("--format", required=True, choices=("natural", "equation"))
    gen_p.add_argument("--label", required=True)
    gen_p.add_argument("--limit", type=int, default=None)
    gen_p.add_argument("--max-source-len", type=int, default=defaults["max_source_len"])
    gen_p.add_argument("--max-new-tokens", type=int, default=defaults["max_new_tokens"])
    gen_p.add_argument("--batch-size", type=int, default=defaults["batch_size"])

    attn_p = sub.add_parser("export-attn", help="write one cross-attention map per record")
    attn_p.add_argument("--model-dir", required=True)
    attn_p.add_argument("--in", dest="in_file", required=True)
    attn_p.add_argument("--out-dir", required=True)
    attn_p.add_argument("--format", required=True, choices=("natural", "equation"))
    attn_p.add_argument("--label", required=True)
    attn_p.add_argument("--limit", type=int, default=None)
    attn_p.add_argument("--max-source-len", type=int, default=defaults["max_source_len"])
    attn_p.add_argument("--max-new-tokens", type=int, default=defaults["max_new_tokens"])
    attn_p.add_argument("--batch-size", type=int, default=defaults["batch_size"])
    return parser


def read_sources(path: str, limit: int | None) -> list[tuple[str, str]]:
    """(id, source) pairs from training rows (source) or corpus rows (question)."""
    pairs: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as handle:
        for index, line in enumerate(handle):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{index + 1}: invalid JSON: {exc.msg}") from exc
            if not isinstance(row, dict):
                raise ValueError(f"{path}:{index + 1}: expected an object")
            text = row.get("source", row.get("question"))
            if not isinstance(text, str) or not text:
                raise ValueError(f"{path}:{index + 1}: no source or question field")
            record_id = str(row["id"]) if "id" in row else str(index)
            pairs.append((record_id, text))
            if limit is not None and len(pairs) >= limit:
                break
    if not pairs:
        raise ValueError(f"{path}: no records")
    return pairs


def _load_model_dir(model_dir: str):
    from .modeling import load_model
    from .vocab import WordVocab

    root = Path(model_dir)
    vocab = WordVocab.load(root / "vocab.json")
    model = load_model(root / "model")
    return model, vocab


def cmd_train(args) -> int:
    from .train import TrainSpec, train

    spec = TrainSpec(
        train_file=args.train_file,
        out_dir=args.out_dir,
        arch=args.arch,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
        max_source_len=args.max_source_len,
        max_target_len=args.max_target_len,
        max_steps=args.max_steps,
        limit=args.limit,
    )
    result = train(spec)
    log.info(
        "trained %d steps, loss %.4f -> %.4f, model at %s",
        result.steps,
        result.initial_loss,
        result.final_loss,
        result.model_dir,
    )
    return 0


def cmd_generate(args) -> int:
    from .generate import greedy_generate, write_predictions
    from .train import write_manifest

    model, vocab = _load_model_dir(args.model_dir)
    pairs = read_sources(args.in_file, args.limit)
    generations = greedy_generate(
        model,
        vocab,
        [source for _, source in pairs],
        max_source_len=args.max_source_len,
        max_new_tokens=args.max_new_tokens,
        batch_size=args.batch_size,
    )
    write_predictions(args.out, [rid for rid, _ in pairs], generations, args.format, args.label)
    write_manifest(
        Path(args.out + ".manifest"),
        {
            "model_dir": args.model_dir,
            "in_file": args.in_file,
            "records": len(pairs),
            "format": args.format,
            "model_label": args.label,
            "decoding": "greedy",
            "max_source_len": args.max_source_len,
            "max_new_tokens": args.max_new_tokens,
            "batch_size": args.batch_size,
        },
    )
    log.info("wrote %d predictions to %s", len(generations), args.out)
    return 0


def cmd_export_attn(args) -> int:
    from .export import export_attention

    model, vocab = _load_model_dir(args.model_dir)
    pairs = read_sources(args.in_file, args.limit)
    written = export_attention(
        model,
        vocab,
        pairs,
        args.out_dir,
        args.format,
        args.label,
        max_source_len=args.max_source_len,
        max_new_tokens=args.max_new_tokens,
        batch_size=args.batch_size,
    )
    log.info("wrote %d attention maps to %s", len(written), args.out_dir)
    return 0


_COMMANDS = {
    "train": cmd_train,
    "generate": cmd_generate,
    "export-attn": cmd_export_attn,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    parser = build_parser(load_defaults())
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
