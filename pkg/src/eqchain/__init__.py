"""Verified equation chains from math word-problem rationales.

The package turns rationales annotated with ``<<expr=value>>``
calculator steps into equation-only or natural-language training
targets, checks every step with exact rational arithmetic, scores model
generations per format, and measures cross-attention alignment between
prose operators and the symbols they should map to.
"""

from .attention import (
    AggregatedMap,
    AttentionMap,
    aggregate_heads,
    attention_entropy,
    load_attention_map,
    mask_tokens,
    pair_alignment_score,
    save_attention_map,
    token_group_indices,
)
from .convert import (
    EquationChain,
    TrainingExample,
    convert_record,
    emit_training_file,
    parse_equation_target,
    render_equation_target,
    render_natural_target,
    to_equation_chain,
)
from .engine import (
    Rational,
    StepCheck,
    check_step,
    evaluate,
    normalize_number,
    parse_expression,
    render_expression,
    render_rational,
    within_tolerance,
)
from .errors import (
    AttentionFormatError,
    DivisionByZeroError,
    DuplicatePredictionError,
    EqChainError,
    ExpressionSyntaxError,
    MissingFormatError,
    NumberFormatError,
    RationaleParseError,
    StepVerificationError,
    UnresolvedPredictionError,
)
from .ingest import (
    Annotation,
    ProblemRecord,
    Rationale,
    extract_final_answer,
    load_dataset,
    parse_rationale,
)
from .score import (
    PredictionRecord,
    ScoreReport,
    build_comparison_table,
    extract_predicted_answer,
    load_predictions,
    score_run,
)
from .validate import ValidationReport, validate_corpus

__version__ = "0.1.0"

__all__ = [
    "AggregatedMap",
    "Annotation",
    "AttentionFormatError",
    "AttentionMap",
    "DivisionByZeroError",
    "DuplicatePredictionError",
    "EqChainError",
    "EquationChain",
    "ExpressionSyntaxError",
    "MissingFormatError",
    "NumberFormatError",
    "PredictionRecord",
    "ProblemRecord",
    "Rational",
    "Rationale",
    "RationaleParseError",
    "ScoreReport",
    "StepCheck",
    "StepVerificationError",
    "TrainingExample",
    "UnresolvedPredictionError",
    "ValidationReport",
    "aggregate_heads",
    "attention_entropy",
    "build_comparison_table",
    "check_step",
    "convert_record",
    "emit_training_file",
    "evaluate",
    "extract_final_answer",
    "extract_predicted_answer",
    "load_attention_map",
    "load_dataset",
    "load_predictions",
    "mask_tokens",
    "normalize_number",
    "pair_alignment_score",
    "parse_equation_target",
    "parse_expression",
    "parse_rationale",
    "render_equation_target",
    "render_expression",
    "render_natural_target",
    "render_rational",
    "save_attention_map",
    "score_run",
    "to_equation_chain",
    "token_group_indices",
    "validate_corpus",
    "within_tolerance",
]
