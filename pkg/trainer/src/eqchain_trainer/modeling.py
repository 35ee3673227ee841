"""Model construction.

Two kinds of architecture name are accepted:

* ``scratch-*``: a small randomly initialized encoder-decoder built
  locally from a pinned configuration. Works fully offline and is what
  the tests use.
* a checkpoint label (``tiny``, ``mini``, ``small``, ``base``) or any
  hub path: downloaded weights for real fine-tuning. Requires network
  access, so these are only resolved when asked for explicitly.
"""

from __future__ import annotations

from pathlib import Path

import torch
from transformers import T5Config, T5ForConditionalGeneration
from transformers.utils import logging as _hf_logging

# checkpoint save/load progress bars are noise on stderr for models this small
_hf_logging.disable_progress_bar()

# published checkpoints by habitual size label, smallest last
CHECKPOINT_SOURCES = {
    "base": "t5-base",
    "small": "t5-small",
    "mini": "google/t5-efficient-mini",
    "tiny": "google/t5-efficient-tiny",
}

SCRATCH_ARCHS = {
    "scratch-tiny": dict(d_model=64, d_kv=16, d_ff=256, num_layers=2, num_heads=4),
    "scratch-mini": dict(d_model=128, d_kv=32, d_ff=512, num_layers=3, num_heads=4),
}

DEFAULT_ARCH = "scratch-tiny"


def build_model(arch: str, vocab_size: int, seed: int = 0) -> T5ForConditionalGeneration:
    if arch in SCRATCH_ARCHS:
        torch.manual_seed(seed)
        config = T5Config(
            vocab_size=vocab_size,
            dropout_rate=0.0,  # keeps small-corpus runs reproducible
            pad_token_id=0,
            eos_token_id=1,
            decoder_start_token_id=0,
            **SCRATCH_ARCHS[arch],
        )
        return T5ForConditionalGeneration(config)
    source = CHECKPOINT_SOURCES.get(arch, arch)
    model = T5ForConditionalGeneration.from_pretrained(source)
    if model.config.vocab_size < vocab_size:
        model.resize_token_embeddings(vocab_size)
    return model


def save_model(model: T5ForConditionalGeneration, path: str | Path) -> None:
    model.save_pretrained(path)


def load_model(path: str | Path) -> T5ForConditionalGeneration:
    return T5ForConditionalGeneration.from_pretrained(path)
