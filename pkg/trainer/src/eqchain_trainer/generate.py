"""Greedy decoding and prediction-file output.

Decoding is a plain argmax loop so the token ids that come out are
exactly the ids later replayed when exporting attention: no sampling,
no beams, nothing stochastic.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch

from .data import _pad_to, _truncate
from .vocab import WordVocab


def _encode_sources(sources: list[str], vocab: WordVocab, max_source_len: int):
    rows = [_truncate(vocab.encode(text), max_source_len, vocab.eos_id) for text in sources]
    input_ids = _pad_to(rows, vocab.pad_id)
    attention_mask = (input_ids != vocab.pad_id).long()
    return input_ids, attention_mask


def greedy_generate_ids(
    model,
    vocab: WordVocab,
    sources: list[str],
    max_source_len: int = 128,
    max_new_tokens: int = 64,
    batch_size: int = 16,
) -> list[list[int]]:
    """Token ids per source, argmax at every position, eos stripped."""
    model.eval()
    start_id = model.config.decoder_start_token_id
    results: list[list[int]] = []
    with torch.no_grad():
        for lo in range(0, len(sources), batch_size):
            chunk = sources[lo : lo + batch_size]
            input_ids, attention_mask = _encode_sources(chunk, vocab, max_source_len)
            n = len(chunk)
            decoder_ids = torch.full((n, 1), start_id, dtype=torch.long)
            finished = torch.zeros(n, dtype=torch.bool)
            for _ in range(max_new_tokens):
                logits = model(
                    input_ids=input_ids,
                    attention_mask=attention_mask,
                    decoder_input_ids=decoder_ids,
                ).logits
                next_ids = logits[:, -1, :].argmax(dim=-1)
                next_ids[finished] = vocab.pad_id
                decoder_ids = torch.cat([decoder_ids, next_ids.unsqueeze(1)], dim=1)
                finished |= next_ids == vocab.eos_id
                if bool(finished.all()):
                    break
            for row in decoder_ids[:, 1:].tolist():
                ids = []
                for token_id in row:
                    if token_id in (vocab.eos_id, vocab.pad_id):
                        break
                    ids.append(token_id)
                results.append(ids)
    return results


def greedy_generate(
    model,
    vocab: WordVocab,
    sources: list[str],
    max_source_len: int = 128,
    max_new_tokens: int = 64,
    batch_size: int = 16,
) -> list[str]:
    id_rows = greedy_generate_ids(
        model, vocab, sources, max_source_len, max_new_tokens, batch_size
    )
    return [vocab.decode(row, stop_at_eos=False) for row in id_rows]


def write_predictions(
    path: str | Path,
    ids: list[str],
    generations: list[str],
    fmt: str,
    model_label: str,
) -> None:
    """One JSON object per line: id, generation, format, model_label."""
    if len(ids) != len(generations):
        raise ValueError(f"{len(ids)} ids but {len(generations)} generations")
    with open(path, "w", encoding="utf-8") as handle:
        for record_id, text in zip(ids, generations):
            row = {
                "id": record_id,
                "generation": text,
                "format": fmt,
                "model_label": model_label,
            }
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
