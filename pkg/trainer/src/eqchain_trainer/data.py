"""Training-file reading and deterministic batching.

The training file is the converter's output: JSON lines with id,
source, target, and format. Batch order is a pure function of (seed,
epoch), and each epoch's order has a digest so runs can be compared
from their manifests alone.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path

import torch

from .vocab import WordVocab

IGNORE_INDEX = -100  # label value the loss skips


@dataclass(frozen=True)
class TrainingItem:
    id: str
    source: str
    target: str
    format: str


def read_training_file(path: str | Path) -> list[TrainingItem]:
    """Load converter output; empty or malformed files are hard errors
    because silently training on nothing would still "succeed"."""
    items: list[TrainingItem] = []
    with open(path, encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {index + 1}: invalid JSON: {exc.msg}") from exc
            for field in ("id", "source", "target", "format"):
                if not isinstance(row.get(field), str) or not row[field].strip():
                    raise ValueError(f"{path}: line {index + 1}: missing field {field!r}")
            items.append(TrainingItem(row["id"], row["source"], row["target"], row["format"]))
    if not items:
        raise ValueError(f"{path}: training file has no records")
    return items


def batch_order(count: int, batch_size: int, seed: int, epoch: int) -> list[list[int]]:
    """Deterministic shuffled batches for one epoch."""
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    indices = list(range(count))
    random.Random(f"{seed}:{epoch}").shuffle(indices)
    return [indices[i : i + batch_size] for i in range(0, count, batch_size)]


def order_digest(order: list[list[int]]) -> str:
    raw = json.dumps(order).encode()
    return hashlib.sha256(raw).hexdigest()[:12]


def _pad_to(rows: list[list[int]], pad_value: int) -> torch.Tensor:
    width = max(len(row) for row in rows)
    return torch.tensor(
        [row + [pad_value] * (width - len(row)) for row in rows], dtype=torch.long
    )


def _truncate(ids: list[int], limit: int, eos_id: int) -> list[int]:
    # keep the closing eos when cutting
    if len(ids) <= limit:
        return ids
    return ids[: limit - 1] + [eos_id]


def encode_batch(
    items: list[TrainingItem],
    vocab: WordVocab,
    max_source_len: int,
    max_target_len: int,
) -> dict[str, torch.Tensor]:
    sources = [_truncate(vocab.encode(item.source), max_source_len, vocab.eos_id) for item in items]
    targets = [_truncate(vocab.encode(item.target), max_target_len, vocab.eos_id) for item in items]
    input_ids = _pad_to(sources, vocab.pad_id)
    attention_mask = (input_ids != vocab.pad_id).long()
    labels = _pad_to(targets, IGNORE_INDEX)
    return {"input_ids": input_ids, "attention_mask": attention_mask, "labels": labels}
