"""Relation-cascade classification of clinical reports."""

from ._core import (
    ClincascadeError,
    Pipeline,
    __version__,
    anonymize,
    cli,
    derive_relations,
    enumerate_orders,
    evaluate,
    generate_synthetic,
    load_corpus,
    mask_text,
    run_conformance,
    save_corpus,
    severity_from_flags,
    strip_numeric,
    stratified_split,
    train_cascade,
)

__all__ = [
    "ClincascadeError",
    "Pipeline",
    "__version__",
    "anonymize",
    "cli",
    "derive_relations",
    "enumerate_orders",
    "evaluate",
    "generate_synthetic",
    "load_corpus",
    "mask_text",
    "run_conformance",
    "save_corpus",
    "severity_from_flags",
    "strip_numeric",
    "stratified_split",
    "train_cascade",
]
