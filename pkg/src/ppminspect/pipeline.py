"""Split -> prefixes -> buckets -> encoding -> one booster per bucket -> evaluation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from . import gbdt
from .encode import FeatureMatrix, Vocabulary, encode_bucket, normalize_encodings
from .eventlog import EventLog, LabelSpec
from .metrics import EvalMetrics, auc, mae
from .prep import REMAINING_TIME, Bucket, extract_prefixes, make_buckets, temporal_split
from .seeding import derive_seed

logger = logging.getLogger(__name__)

#: shorthand names used by the benchmarks, mapped to (bucketing, encodings)
METHODS = {
    "single_agg": ("single", ("static", "aggregation")),
    "prefix_agg": ("prefix_length", ("static", "aggregation")),
    "prefix_index": ("prefix_length", ("static", "index")),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    target: Union[LabelSpec, str] = REMAINING_TIME
    bucketing: str = "single"
    encodings: tuple[str, ...] = ("static", "aggregation")
    min_len: int = 1
    max_len: int = 40
    gap: int = 1
    split_ratio: float = 0.8
    hyperparams: gbdt.Hyperparams = field(default_factory=gbdt.Hyperparams)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "encodings", normalize_encodings(self.encodings))
        if self.bucketing not in ("single", "prefix_length"):
            raise ConfigError(f"unknown bucketing {self.bucketing!r}")
        if "index" in self.encodings and self.bucketing != "prefix_length":
            raise ConfigError("index encoding requires prefix_length bucketing")
        if isinstance(self.target, str) and self.target != REMAINING_TIME:
            raise ConfigError(f"unknown target {self.target!r}")

    @classmethod
    def from_method(cls, method: str, **kwargs) -> "PipelineConfig":
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}; known: {sorted(METHODS)}")
        bucketing, encodings = METHODS[method]
        return cls(bucketing=bucketing, encodings=encodings, **kwargs)

    @property
    def task(self) -> str:
        return gbdt.SQUARED_ERROR if self.target == REMAINING_TIME else gbdt.BINARY_LOGISTIC

    @property
    def metric(self) -> str:
        return "mae" if self.target == REMAINING_TIME else "auc"


@dataclass
class TrainedPipeline:
    config: PipelineConfig
    log: EventLog
    train_ids: list[str]
    test_ids: list[str]
    vocab: Vocabulary
    models: dict[str, gbdt.BoostedEnsemble]
    train_matrices: dict[str, FeatureMatrix]
    test_matrices: dict[str, FeatureMatrix]
    buckets: dict[str, Bucket]
    metrics: EvalMetrics

    def bucket_for_length(self, length: int) -> str | None:
        if self.config.bucketing == "single":
            return "single" if "single" in self.models else None
        key = f"prefix_{length}"
        return key if key in self.models else None

    def find_row(self, case_id: str, length: int) -> tuple[str, FeatureMatrix, int]:
        """Locate an encoded prefix among test then train matrices."""
        for mats in (self.test_matrices, self.train_matrices):
            for bid, m in mats.items():
                if (case_id, length) in m.row_ids and bid in self.models:
                    return bid, m, m.row_index(case_id, length)
        raise KeyError(f"no encoded prefix for case {case_id!r} at length {length}")


def _encode_all(buckets, log, vocab, cfg) -> dict[str, FeatureMatrix]:
    return {b.id: encode_bucket(b, log.schema, cfg.encodings, vocab, log) for b in buckets}


def train_pipeline(log: EventLog, config: PipelineConfig) -> TrainedPipeline:
    train_ids, test_ids = temporal_split(log, config.split_ratio)
    train_log, test_log = log.subset(train_ids), log.subset(test_ids)
    vocab = Vocabulary.fit(train_log, log.schema)

    def prefixes(sub):
        return extract_prefixes(sub, config.min_len, config.max_len, config.gap, config.target)

    train_prefixes, test_prefixes = prefixes(train_log), prefixes(test_log)
    if not train_prefixes:
        raise ConfigError("no training prefixes: check prefix bounds against trace lengths")
    train_buckets = make_buckets(train_prefixes, config.bucketing)
    train_mats = _encode_all(train_buckets, log, vocab, config)

    metrics = EvalMetrics(metric=config.metric)
    hp = replace(config.hyperparams, seed=derive_seed(config.seed, "fit"))
    models = {}
    for b in train_buckets:
        m = train_mats[b.id]
        y = m.targets
        if len(y) < 2:
            reason = "fewer than 2 training prefixes"
        elif config.task == gbdt.BINARY_LOGISTIC and len(np.unique(y)) < 2:
            reason = "single-class training data"
        else:
            reason = None
        if reason:
            logger.warning("skipping bucket %s: %s", b.id, reason)
            metrics.skipped_buckets[b.id] = reason
            continue
        models[b.id] = gbdt.fit(m, y, hp, task=config.task)

    test_mats = {}
    if test_prefixes:
        for b in make_buckets(test_prefixes, config.bucketing):
            if b.id in models:
                test_mats[b.id] = encode_bucket(b, log.schema, config.encodings, vocab, log)

    lengths, preds, targets = [], [], []
    for bid, m in test_mats.items():
        lengths.extend(length for _, length in m.row_ids)
        preds.append(gbdt.predict(models[bid], m))
        targets.append(m.targets)
    _evaluate(metrics, np.array(lengths, dtype=int), preds, targets)

    return TrainedPipeline(
        config=config,
        log=log,
        train_ids=train_ids,
        test_ids=test_ids,
        vocab=vocab,
        models=models,
        train_matrices={k: v for k, v in train_mats.items() if k in models},
        test_matrices=test_mats,
        buckets={b.id: b for b in train_buckets},
        metrics=metrics,
    )


def _score(metric: str, p: np.ndarray, y: np.ndarray) -> float | None:
    if metric == "mae":
        return mae(p, y)
    if len(np.unique(y)) < 2:
        return None
    return auc(p, y)


def _evaluate(metrics: EvalMetrics, lengths, preds, targets) -> None:
    if not preds:
        return
    p, y = np.concatenate(preds), np.concatenate(targets)
    overall = _score(metrics.metric, p, y)
    if metrics.metric == "auc":
        metrics.auc = overall
    else:
        metrics.mae = overall
    for L in np.unique(lengths):
        sel = lengths == L
        metrics.by_prefix_length[int(L)] = _score(metrics.metric, p[sel], y[sel])
        metrics.n_test[int(L)] = int(sel.sum())
