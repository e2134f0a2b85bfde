"""Predictive process monitoring with explanation inspection.

Train outcome / remaining-time models on event-log prefixes, explain them
globally and locally, and check the explanations against process knowledge
mined from the same log.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .eventlog import (
    ContainsActivity,
    Event,
    EventLog,
    EventuallyFollows,
    Trace,
    build_log,
    infer_schema,
)
from .ingest import ColumnMapping, parse_csv
from .prep import extract_prefixes, make_buckets, temporal_split
from .encode import FeatureMatrix, FeatureName, encode_bucket
from .gbdt import BoostedEnsemble, Hyperparams, fit, predict
from .metrics import auc, mae
from .explain import (
    GlobalExplanation,
    LocalExplanation,
    TrainingStats,
    explain_local,
    gain_importance,
    permutation_importance,
)
from .mine import discover_dfg, eventually_follows_ratio, min_prefix_index, precedes_ratio
from .inspection import (
    InspectionConfig,
    InspectionReport,
    build_report,
    inspect_leakage,
    inspect_relevance,
    inspect_sparsity,
    inspect_static_dominance,
)
from .pipeline import PipelineConfig, train_pipeline

__all__ = [
    "BoostedEnsemble",
    "ColumnMapping",
    "ContainsActivity",
    "Event",
    "EventLog",
    "EventuallyFollows",
    "FeatureMatrix",
    "FeatureName",
    "GlobalExplanation",
    "Hyperparams",
    "InspectionConfig",
    "InspectionReport",
    "LocalExplanation",
    "PipelineConfig",
    "Trace",
    "TrainingStats",
    "auc",
    "build_log",
    "build_report",
    "discover_dfg",
    "encode_bucket",
    "eventually_follows_ratio",
    "explain_local",
    "extract_prefixes",
    "fit",
    "gain_importance",
    "infer_schema",
    "inspect_leakage",
    "inspect_relevance",
    "inspect_sparsity",
    "inspect_static_dominance",
    "mae",
    "make_buckets",
    "min_prefix_index",
    "parse_csv",
    "permutation_importance",
    "precedes_ratio",
    "predict",
    "temporal_split",
    "train_pipeline",
]
