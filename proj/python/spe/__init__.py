"""Comparative story-point estimation."""

import json

from ._core import (
    Dataset,
    FormatError,
    HashedTfidf,
    IoError,
    NotFoundError,
    SpeError,
    UndefinedCorrelation,
    ValidationError,
    default_train_config,
    fnv1a64,
    fractional_ranks,
    item_text,
    load_project,
    mae,
    make_synthetic,
    pearson,
    score,
    simulate_pairs,
    spearman,
    tokenize,
    train_comparative,
)
from . import _core

__all__ = [
    "Dataset", "FormatError", "HashedTfidf", "IoError", "NotFoundError", "SpeError",
    "UndefinedCorrelation", "ValidationError", "default_train_config", "fnv1a64",
    "fractional_ranks", "item_text", "load_project", "mae", "make_synthetic", "pearson",
    "render_report", "run_experiment", "score", "simulate_pairs", "spearman", "tokenize",
    "train_comparative",
]


def run_experiment(config):
    """Run an experiment from a config dict (or JSON string); returns the report dict."""
    text = config if isinstance(config, str) else json.dumps(config)
    return json.loads(_core.run_experiment_json(text))


def render_report(report, fmt="markdown", with_reference=True):
    text = report if isinstance(report, str) else json.dumps(report)
    return _core.render_report_json(text, fmt, with_reference)
