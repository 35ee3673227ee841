"""Cross-attention inspection: loading, aggregation, token pairing.

The interchange file is JSON with ``meta``, ``encoder_tokens``,
``decoder_tokens``, a ``shape`` of [layers, heads, decoder, encoder],
and ``data`` as nested arrays. Every decoder row is a distribution over
encoder positions; rows that drift beyond 1e-4 from summing to 1 are
renormalized on load with a warning, and aggregated rows are always
renormalized so downstream sums hold to 1e-9.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AttentionFormatError

log = logging.getLogger(__name__)

ROW_SUM_LOAD_TOLERANCE = 1e-4
ROW_SUM_STRICT_TOLERANCE = 1e-9

POLICY_LAST_LAYER_MEAN = "last-layer-mean"
POLICY_ALL_MEAN = "all-mean"

SCORE_OK = "ok"
SCORE_NOT_FOUND = "not-found"

# Default paired tokens worth checking on any run: a prose operator
# word against the symbol it should align with.
DEFAULT_PAIRS = (
    ("times", "*"),
    ("half", "/2"),
    ("twice", "2"),
    ("plus", "+"),
    ("minus", "-"),
)


@dataclass(frozen=True)
class AttentionMap:
    """Raw per-layer, per-head cross-attention for one generation."""

    encoder_tokens: tuple[str, ...]
    decoder_tokens: tuple[str, ...]
    tensor: np.ndarray  # [layers, heads, decoder, encoder], float64
    record_id: str | None = None
    format: str | None = None
    model_label: str | None = None
    renormalized_rows: int = 0

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return tuple(self.tensor.shape)  # type: ignore[return-value]


@dataclass(frozen=True)
class AggregatedMap:
    """One [decoder, encoder] matrix after a head-aggregation policy.

    Rows sum to 1 within 1e-9 by construction.
    """

    matrix: np.ndarray
    policy: str
    encoder_tokens: tuple[str, ...]
    decoder_tokens: tuple[str, ...]
    record_id: str | None = None
    format: str | None = None
    model_label: str | None = None


def _as_tensor(data: object, shape: list[int]) -> np.ndarray:
    try:
        tensor = np.asarray(data, dtype=np.float64)
    except (ValueError, TypeError) as exc:
        raise AttentionFormatError(f"data is not a rectangular numeric array: {exc}") from exc
    if tensor.ndim != 4:
        raise AttentionFormatError(f"data must have 4 dimensions, got {tensor.ndim}")
    if list(tensor.shape) != list(shape):
        raise AttentionFormatError(
            f"declared shape {shape} does not match data shape {list(tensor.shape)}"
        )
    return tensor


def _check_entries(tensor: np.ndarray) -> None:
    if not np.isfinite(tensor).all():
        index = np.argwhere(~np.isfinite(tensor))[0]
        raise AttentionFormatError(f"non-finite attention weight at {index.tolist()}")
    if (tensor < 0).any():
        index = np.argwhere(tensor < 0)[0]
        raise AttentionFormatError(f"negative attention weight at {index.tolist()}")


def _renormalize_rows(tensor: np.ndarray, tolerance: float) -> int:
    """Scale rows whose sums drift beyond ``tolerance``; zero rows are
    unrecoverable. Returns how many rows were rescaled."""
    sums = tensor.sum(axis=-1)
    if (sums == 0).any():
        index = np.argwhere(sums == 0)[0]
        raise AttentionFormatError(f"attention row sums to zero at {index.tolist()}")
    off = np.abs(sums - 1.0) > tolerance
    count = int(off.sum())
    if count:
        tensor[off] = tensor[off] / sums[off][..., np.newaxis]
    return count


def load_attention_map(path: str | Path) -> AttentionMap:
    """Read and validate one interchange file.

    Raises :class:`AttentionFormatError` for structural problems,
    negative or non-finite weights (naming the offending index), and
    zero-sum rows. Rows off by more than 1e-4 are renormalized and
    counted.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise AttentionFormatError(f"{path}: invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise AttentionFormatError(f"{path}: top level must be an object")
    for key in ("encoder_tokens", "decoder_tokens", "shape", "data"):
        if key not in obj:
            raise AttentionFormatError(f"{path}: missing field {key!r}")
    encoder_tokens = obj["encoder_tokens"]
    decoder_tokens = obj["decoder_tokens"]
    shape = obj["shape"]
    if not (isinstance(encoder_tokens, list) and all(isinstance(t, str) for t in encoder_tokens)):
        raise AttentionFormatError(f"{path}: encoder_tokens must be a list of strings")
    if not (isinstance(decoder_tokens, list) and all(isinstance(t, str) for t in decoder_tokens)):
        raise AttentionFormatError(f"{path}: decoder_tokens must be a list of strings")
    if not (
        isinstance(shape, list)
        and len(shape) == 4
        and all(isinstance(n, int) and n > 0 for n in shape)
    ):
        raise AttentionFormatError(f"{path}: shape must be 4 positive integers")
    if shape[2] != len(decoder_tokens):
        raise AttentionFormatError(
            f"{path}: shape says {shape[2]} decoder positions but {len(decoder_tokens)} tokens"
        )
    if shape[3] != len(encoder_tokens):
        raise AttentionFormatError(
            f"{path}: shape says {shape[3]} encoder positions but {len(encoder_tokens)} tokens"
        )
    try:
        tensor = _as_tensor(obj["data"], shape)
        _check_entries(tensor)
        renormalized = _renormalize_rows(tensor, ROW_SUM_LOAD_TOLERANCE)
    except AttentionFormatError as exc:
        raise AttentionFormatError(f"{path}: {exc}") from exc
    if renormalized:
        log.warning("%s: renormalized %d attention rows", path, renormalized)
    meta = obj.get("meta", {})
    if not isinstance(meta, dict):
        raise AttentionFormatError(f"{path}: meta must be an object")
    return AttentionMap(
        encoder_tokens=tuple(encoder_tokens),
        decoder_tokens=tuple(decoder_tokens),
        tensor=tensor,
        record_id=meta.get("record_id"),
        format=meta.get("format"),
        model_label=meta.get("model_label"),
        renormalized_rows=renormalized,
    )


def save_attention_map(attention: AttentionMap, path: str | Path) -> None:
    payload = {
        "meta": {
            "record_id": attention.record_id,
            "format": attention.format,
            "model_label": attention.model_label,
        },
        "encoder_tokens": list(attention.encoder_tokens),
        "decoder_tokens": list(attention.decoder_tokens),
        "shape": list(attention.tensor.shape),
        "data": attention.tensor.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)
        fh.write("\n")


def parse_policy(text: str) -> str | tuple[int, int]:
    """CLI spelling of a policy; ``single:L,H`` becomes a tuple."""
    if text in (POLICY_LAST_LAYER_MEAN, POLICY_ALL_MEAN):
        return text
    if text.startswith("single:"):
        body = text[len("single:") :]
        parts = body.split(",")
        if len(parts) == 2:
            try:
                return int(parts[0]), int(parts[1])
            except ValueError:
                pass
    raise ValueError(f"unknown aggregation policy: {text!r}")


def aggregate_heads(
    attention: AttentionMap,
    policy: str | tuple[int, int] = POLICY_LAST_LAYER_MEAN,
) -> AggregatedMap:
    """Collapse layers and heads to one matrix.

    Policies: mean over the last layer's heads (default), mean over all
    layers and heads, or a single (layer, head) pair. Rows of the result
    are rescaled to sum to exactly 1 within 1e-9.
    """
    tensor = attention.tensor
    if isinstance(policy, tuple):
        layer, head = policy
        layers, heads = tensor.shape[0], tensor.shape[1]
        if not (-layers <= layer < layers) or not (-heads <= head < heads):
            raise ValueError(f"(layer, head)=({layer}, {head}) out of range for shape {attention.shape}")
        matrix = tensor[layer, head].copy()
        policy_text = f"single:{layer},{head}"
    elif policy == POLICY_LAST_LAYER_MEAN:
        matrix = tensor[-1].mean(axis=0)
        policy_text = policy
    elif policy == POLICY_ALL_MEAN:
        matrix = tensor.mean(axis=(0, 1))
        policy_text = policy
    else:
        raise ValueError(f"unknown aggregation policy: {policy!r}")
    matrix = matrix / matrix.sum(axis=-1, keepdims=True)
    return AggregatedMap(
        matrix=matrix,
        policy=policy_text,
        encoder_tokens=attention.encoder_tokens,
        decoder_tokens=attention.decoder_tokens,
        record_id=attention.record_id,
        format=attention.format,
        model_label=attention.model_label,
    )


def normalize_token(token: str) -> str:
    """Strip subword markers and case so surface variants compare equal."""
    text = token.lstrip("▁")  # sentencepiece word-start marker
    if text.startswith("##"):
        text = text[2:]
    return text.casefold()


def token_group_indices(tokens: tuple[str, ...] | list[str], query: str) -> list[int]:
    """Positions whose tokens spell the query, alone or as a consecutive
    span of subword pieces. Sorted, deduplicated; empty when nothing
    matches."""
    target = normalize_token(query)
    if not target:
        return []
    found: set[int] = set()
    normalized = [normalize_token(t) for t in tokens]
    for index, norm in enumerate(normalized):
        if norm == target:
            found.add(index)
    for start in range(len(normalized)):
        if not normalized[start]:
            continue
        concat = ""
        span = []
        for index in range(start, len(normalized)):
            concat += normalized[index]
            span.append(index)
            if not target.startswith(concat):
                break
            if concat == target:
                found.update(span)
                break
    return sorted(found)


def mask_tokens(aggregated: AggregatedMap, masked: set[str] | frozenset[str]) -> AggregatedMap:
    """Drop encoder columns and decoder rows whose tokens are masked,
    then renormalize the remaining rows.

    Raises :class:`AttentionFormatError` when a kept row loses all of
    its mass, or when masking would empty either axis.
    """
    masked_norm = {normalize_token(t) for t in masked}
    keep_enc = [i for i, t in enumerate(aggregated.encoder_tokens) if normalize_token(t) not in masked_norm]
    keep_dec = [i for i, t in enumerate(aggregated.decoder_tokens) if normalize_token(t) not in masked_norm]
    if not keep_enc:
        raise AttentionFormatError("masking removed every encoder token")
    if not keep_dec:
        raise AttentionFormatError("masking removed every decoder token")
    matrix = aggregated.matrix[np.ix_(keep_dec, keep_enc)].copy()
    sums = matrix.sum(axis=-1)
    if (sums == 0).any():
        row = int(np.argwhere(sums == 0)[0][0])
        token = aggregated.decoder_tokens[keep_dec[row]]
        raise AttentionFormatError(
            f"masking removed all attention mass for decoder token {token!r}"
        )
    matrix = matrix / sums[:, np.newaxis]
    return AggregatedMap(
        matrix=matrix,
        policy=aggregated.policy,
        encoder_tokens=tuple(aggregated.encoder_tokens[i] for i in keep_enc),
        decoder_tokens=tuple(aggregated.decoder_tokens[i] for i in keep_dec),
        record_id=aggregated.record_id,
        format=aggregated.format,
        model_label=aggregated.model_label,
    )


@dataclass(frozen=True)
class PairScore:
    """Alignment of a decoder-side token onto an encoder-side token.

    ``score`` is the mean, over matched decoder rows, of the attention
    mass landing on matched encoder columns; None with status
    ``not-found`` when either side has no match (deliberately distinct
    from a true 0.0).
    """

    encoder_query: str
    decoder_query: str
    encoder_indices: tuple[int, ...]
    decoder_indices: tuple[int, ...]
    score: float | None
    status: str


def pair_alignment_score(
    aggregated: AggregatedMap,
    encoder_query: str,
    decoder_query: str,
) -> PairScore:
    enc_indices = token_group_indices(aggregated.encoder_tokens, encoder_query)
    dec_indices = token_group_indices(aggregated.decoder_tokens, decoder_query)
    if not enc_indices or not dec_indices:
        return PairScore(
            encoder_query=encoder_query,
            decoder_query=decoder_query,
            encoder_indices=tuple(enc_indices),
            decoder_indices=tuple(dec_indices),
            score=None,
            status=SCORE_NOT_FOUND,
        )
    block = aggregated.matrix[np.ix_(dec_indices, enc_indices)]
    score = float(block.sum(axis=1).mean())
    score = min(1.0, max(0.0, score))  # guard float dust at the edges
    return PairScore(
        encoder_query=encoder_query,
        decoder_query=decoder_query,
        encoder_indices=tuple(enc_indices),
        decoder_indices=tuple(dec_indices),
        score=score,
        status=SCORE_OK,
    )


@dataclass(frozen=True)
class EntropySummary:
    per_row: tuple[float, ...]
    mean: float


def attention_entropy(aggregated: AggregatedMap) -> EntropySummary:
    """Shannon entropy in nats of each decoder row, and their mean.

    Zero weights contribute zero (the 0*ln(0) limit), so a one-hot row
    scores 0 and a uniform row scores ln(encoder length).
    """
    per_row = []
    for row in aggregated.matrix:
        positive = row[row > 0]
        per_row.append(float(-(positive * np.log(positive)).sum()))
    mean = math.fsum(per_row) / len(per_row) if per_row else 0.0
    return EntropySummary(per_row=tuple(per_row), mean=mean)


def emit_heatmap_grid(aggregated: AggregatedMap, path: str | Path) -> None:
    """Write the aggregated matrix as a CSV grid: encoder tokens across
    the header, one row per decoder token."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([""] + list(aggregated.encoder_tokens))
        for token, row in zip(aggregated.decoder_tokens, aggregated.matrix):
            writer.writerow([token] + [format(v, ".6g") for v in row])
