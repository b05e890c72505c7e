"""Python bindings for the ccgen record-to-text library."""

from ._core import (
    DivergenceError,
    FormatError,
    Model,
    RecordSchema,
    RunConfig,
    ValidationError,
    cider,
    classify_eval,
    classify_train,
    epi_report,
    evaluate,
    generate,
    ngram_overlap,
    novelty,
    preprocess,
    pretrain_encoder,
    ratio_from_counts,
    scan_names,
    synth_corpus,
    synth_data,
    tokenize,
    train,
    train_embeddings,
    weighted_metrics,
)

__all__ = [name for name in dir() if not name.startswith("_")]
