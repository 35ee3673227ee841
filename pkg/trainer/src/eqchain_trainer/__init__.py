"""Fine-tune small seq2seq models on equation-chain training files.

The package consumes JSONL training files, emits JSONL prediction
files, and exports cross-attention maps in the shared interchange
layout. Nothing here imports the converter package; the two sides
meet only at those file formats.
"""

from .data import (
    IGNORE_INDEX,
    TrainingItem,
    batch_order,
    encode_batch,
    order_digest,
    read_training_file,
)
from .export import (
    attention_filename,
    cross_attention_tensor,
    export_attention,
    write_attention_file,
)
from .generate import greedy_generate, greedy_generate_ids, write_predictions
from .modeling import (
    CHECKPOINT_SOURCES,
    DEFAULT_ARCH,
    SCRATCH_ARCHS,
    build_model,
    load_model,
    save_model,
)
from .train import TrainResult, TrainSpec, dataset_loss, train, write_manifest
from .vocab import (
    EOS_TOKEN,
    NEWLINE_TOKEN,
    PAD_TOKEN,
    UNK_TOKEN,
    WordVocab,
    text_of,
    words_of,
)

__version__ = "0.1.0"

__all__ = [
    "CHECKPOINT_SOURCES",
    "DEFAULT_ARCH",
    "EOS_TOKEN",
    "IGNORE_INDEX",
    "NEWLINE_TOKEN",
    "PAD_TOKEN",
    "SCRATCH_ARCHS",
    "TrainResult",
    "TrainSpec",
    "TrainingItem",
    "UNK_TOKEN",
    "WordVocab",
    "attention_filename",
    "batch_order",
    "build_model",
    "cross_attention_tensor",
    "dataset_loss",
    "encode_batch",
    "export_attention",
    "greedy_generate",
    "greedy_generate_ids",
    "load_model",
    "order_digest",
    "read_training_file",
    "save_model",
    "text_of",
    "train",
    "words_of",
    "write_attention_file",
    "write_manifest",
    "write_predictions",
]
