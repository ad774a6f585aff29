"""Parallel text generation with per-token early exit.

The package is a thin wrapper over the C++ core: a from-scratch tensor and
autodiff engine, an encoder-decoder transformer whose decoder predicts every
position in parallel, per-layer off-ramp classifiers with entropy-thresholded
(hard) or feedback-based (soft) early exit, the span-corruption pretraining
objective, sequence metrics, and a deterministic synthetic data generator.
"""

from ._core import (
    ArResult,
    EncoderStates,
    FinetuneRecord,
    FlopCounters,
    GenerationResult,
    Model,
    ModelConfig,
    OverlapScore,
    StepRecord,
    Vocabulary,
    bleu,
    bleu_corpus,
    decode_ar_reference,
    decode_ids,
    distinct_n,
    encode,
    finetune,
    generate_hard,
    generate_soft,
    load_checkpoint,
    make_synthetic,
    meteor,
    pretrain,
    rouge_l,
    rouge_n,
    run_cli,
    save_checkpoint,
    tokenize_words,
)

__all__ = [
    "ArResult",
    "EncoderStates",
    "FinetuneRecord",
    "FlopCounters",
    "GenerationResult",
    "Model",
    "ModelConfig",
    "OverlapScore",
    "StepRecord",
    "Vocabulary",
    "bleu",
    "bleu_corpus",
    "decode_ar_reference",
    "decode_ids",
    "distinct_n",
    "encode",
    "finetune",
    "generate_hard",
    "generate_soft",
    "load_checkpoint",
    "make_synthetic",
    "meteor",
    "pretrain",
    "rouge_l",
    "rouge_n",
    "run_cli",
    "save_checkpoint",
    "tokenize_words",
]

__version__ = "0.1.0"
