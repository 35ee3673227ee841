"""Teacher-forced fine-tuning with a run manifest.

Whatever happens to the run, the manifest is written: a normal finish
records ``partial=false``, an interrupted one records ``partial=true``
plus everything known up to the failure, so no run is ever ambiguous.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .data import batch_order, encode_batch, order_digest, read_training_file
from .modeling import DEFAULT_ARCH, build_model, save_model
from .vocab import WordVocab

log = logging.getLogger(__name__)


@dataclass
class TrainSpec:
    train_file: str
    out_dir: str
    arch: str = DEFAULT_ARCH
    epochs: int = 2
    batch_size: int = 16
    learning_rate: float = 3e-3
    seed: int = 7
    max_source_len: int = 128
    max_target_len: int = 96
    max_steps: int | None = None
    limit: int | None = None


@dataclass
class TrainResult:
    initial_loss: float
    final_loss: float
    steps: int
    model_dir: Path
    vocab_path: Path
    manifest_path: Path
    epoch_digests: list[str] = field(default_factory=list)


def write_manifest(path: Path, entries: dict) -> None:
    lines = [f"{key}={value}" for key, value in entries.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def dataset_loss(model, batches) -> float:
    """Mean teacher-forced loss over fixed batches, no grad, eval mode."""
    model.eval()
    total = 0.0
    with torch.no_grad():
        for batch in batches:
            total += float(model(**batch).loss)
    model.train()
    return total / len(batches)


def train(spec: TrainSpec) -> TrainResult:
    items = read_training_file(spec.train_file)
    if spec.limit is not None:
        items = items[: spec.limit]
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    vocab = WordVocab.build(
        [item.source for item in items] + [item.target for item in items]
    )
    vocab_path = out_dir / "vocab.json"
    vocab.save(vocab_path)

    model = build_model(spec.arch, len(vocab), seed=spec.seed)
    optimizer = torch.optim.AdamW(model.parameters(), lr=spec.learning_rate)

    def batches_for(order: list[list[int]]):
        for group in order:
            yield encode_batch(
                [items[i] for i in group], vocab, spec.max_source_len, spec.max_target_len
            )

    # fixed file-order batches, reused for the before/after loss
    eval_order = [
        list(range(i, min(i + spec.batch_size, len(items))))
        for i in range(0, len(items), spec.batch_size)
    ]
    eval_batches = list(batches_for(eval_order))

    manifest_path = out_dir / "manifest.txt"
    manifest: dict = {
        "arch": spec.arch,
        "train_file": spec.train_file,
        "records": len(items),
        "vocab_size": len(vocab),
        "epochs": spec.epochs,
        "batch_size": spec.batch_size,
        "learning_rate": spec.learning_rate,
        "seed": spec.seed,
        "max_source_len": spec.max_source_len,
        "max_target_len": spec.max_target_len,
        "max_steps": spec.max_steps if spec.max_steps is not None else "none",
        "limit": spec.limit if spec.limit is not None else "none",
        "partial": "true",
    }

    started = time.monotonic()
    steps = 0
    digests: list[str] = []
    try:
        initial_loss = dataset_loss(model, eval_batches)
        manifest["initial_loss"] = f"{initial_loss:.6f}"
        log.info("initial loss %.4f over %d records", initial_loss, len(items))

        stop = False
        for epoch in range(spec.epochs):
            order = batch_order(len(items), spec.batch_size, spec.seed, epoch)
            digest = order_digest(order)
            digests.append(digest)
            manifest[f"epoch_{epoch}_digest"] = digest
            log.info("epoch %d: %d batches, order digest %s", epoch, len(order), digest)
            for batch in batches_for(order):
                optimizer.zero_grad()
                loss = model(**batch).loss
                loss.backward()
                optimizer.step()
                steps += 1
                if spec.max_steps is not None and steps >= spec.max_steps:
                    stop = True
                    break
            manifest["steps"] = steps
            if stop:
                break

        final_loss = dataset_loss(model, eval_batches)
        manifest["final_loss"] = f"{final_loss:.6f}"
        manifest["steps"] = steps
        log.info("final loss %.4f after %d steps", final_loss, steps)

        model_dir = out_dir / "model"
        save_model(model, model_dir)
        manifest["model_dir"] = str(model_dir)
        manifest["partial"] = "false"
    finally:
        manifest["wall_clock_seconds"] = f"{time.monotonic() - started:.3f}"
        write_manifest(manifest_path, manifest)

    return TrainResult(
        initial_loss=initial_loss,
        final_loss=final_loss,
        steps=steps,
        model_dir=model_dir,
        vocab_path=vocab_path,
        manifest_path=manifest_path,
        epoch_digests=digests,
    )
