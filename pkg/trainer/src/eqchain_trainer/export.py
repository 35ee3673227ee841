"""Cross-attention export in the shared interchange layout.

Each record gets one JSON file holding the decoder-over-encoder
attention tensor gathered while replaying the model's own greedy
output under teacher forcing. For greedy decoding the replay sees
the identical prefixes the decode loop saw, so the weights match
what generation used. Row ``i`` of each map is the attention spent
producing generated token ``i + 1``.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import torch

from .generate import _encode_sources, greedy_generate_ids
from .vocab import WordVocab

_FILENAME_SAFE = re.compile(r"[^A-Za-z0-9._-]")


def attention_filename(record_id: str) -> str:
    return _FILENAME_SAFE.sub("_", record_id) + ".json"


def cross_attention_tensor(model, vocab: WordVocab, source: str, generated_ids: list[int],
                           max_source_len: int = 128):
    """Replay one generation; return float64 [L, H, dec, enc] plus both token rows."""
    input_ids, attention_mask = _encode_sources([source], vocab, max_source_len)
    start_id = model.config.decoder_start_token_id
    decoder_input_ids = torch.tensor([[start_id] + generated_ids[:-1]])
    with torch.no_grad():
        out = model(
            input_ids=input_ids,
            attention_mask=attention_mask,
            decoder_input_ids=decoder_input_ids,
            output_attentions=True,
        )
    # cross_attentions: tuple of layers, each [1, H, dec, enc]
    tensor = torch.stack([layer[0] for layer in out.cross_attentions]).to(torch.float64)
    source_len = int(attention_mask[0].sum())
    encoder_tokens = [vocab.tokens[i] for i in input_ids[0, :source_len].tolist()]
    decoder_tokens = [vocab.tokens[i] for i in generated_ids]
    return tensor[:, :, :, :source_len], encoder_tokens, decoder_tokens


def write_attention_file(
    path: str | Path,
    tensor,
    encoder_tokens: list[str],
    decoder_tokens: list[str],
    record_id: str,
    fmt: str,
    model_label: str,
) -> None:
    payload = {
        "meta": {
            "record_id": record_id,
            "format": fmt,
            "model_label": model_label,
        },
        "encoder_tokens": encoder_tokens,
        "decoder_tokens": decoder_tokens,
        "shape": list(tensor.shape),
        "data": tensor.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)
        fh.write("\n")


def export_attention(
    model,
    vocab: WordVocab,
    records: list[tuple[str, str]],
    out_dir: str | Path,
    fmt: str,
    model_label: str,
    max_source_len: int = 128,
    max_new_tokens: int = 64,
    batch_size: int = 16,
) -> list[Path]:
    """Generate for each (id, source) pair and write one map per record."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sources = [source for _, source in records]
    id_rows = greedy_generate_ids(
        model, vocab, sources, max_source_len, max_new_tokens, batch_size
    )
    written: list[Path] = []
    for (record_id, source), generated in zip(records, id_rows):
        if not generated:
            # always at least one decoder row, even if the model stops at once
            generated = [vocab.eos_id]
        tensor, encoder_tokens, decoder_tokens = cross_attention_tensor(
            model, vocab, source, generated, max_source_len
        )
        path = out_dir / attention_filename(record_id)
        write_attention_file(
            path, tensor, encoder_tokens, decoder_tokens, record_id, fmt, model_label
        )
        written.append(path)
    return written
