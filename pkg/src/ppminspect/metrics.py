from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MetricError(ValueError):
    pass


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks, tied values share the mean of their positions."""
    uniq, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    first = np.concatenate(([0], np.cumsum(counts)[:-1]))
    return (first + (counts + 1) / 2.0)[inverse]


def auc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum identity.

    Equals the probability that a random positive scores above a random
    negative, ties counting one half.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    if scores.shape != labels.shape:
        raise MetricError(f"{scores.size} scores for {labels.size} labels")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC needs both classes")
    ranks = _average_ranks(scores)
    # half-integer arithmetic, exact in float64 for any realistic n
    wins = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(wins / (n_pos * n_neg))


def mae(predictions, targets) -> float:
    predictions = np.asarray(predictions, dtype=float).ravel()
    targets = np.asarray(targets, dtype=float).ravel()
    if predictions.shape != targets.shape or predictions.size == 0:
        raise MetricError(f"need equal non-empty lengths, got {predictions.size} and {targets.size}")
    return float(np.mean(np.abs(predictions - targets)))


@dataclass
class EvalMetrics:
    metric: str  # "auc" or "mae"
    auc: float | None = None
    mae: float | None = None
    #: prefix length -> metric value on test prefixes of that length
    by_prefix_length: dict[int, float | None] = field(default_factory=dict)
    n_test: dict[int, int] = field(default_factory=dict)
    skipped_buckets: dict[str, str] = field(default_factory=dict)

    @property
    def value(self) -> float | None:
        return self.auc if self.metric == "auc" else self.mae

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "auc": self.auc,
            "mae": self.mae,
            "by_prefix_length": {str(k): v for k, v in sorted(self.by_prefix_length.items())},
            "n_test": {str(k): v for k, v in sorted(self.n_test.items())},
            "skipped_buckets": dict(sorted(self.skipped_buckets.items())),
        }
