"""Second-order gradient boosted regression trees with L2-regularised leaves.

Binary outcomes use the logistic loss, remaining time the squared error
(halved, so that the hessian is 1). Trees grow depth-wise with exact greedy
split search over sorted unique values; the split threshold is the midpoint
between neighbouring values and rows with ``x < threshold`` go left.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .encode import FeatureMatrix

BINARY_LOGISTIC = "binary_logistic"
SQUARED_ERROR = "squared_error"
TASKS = (BINARY_LOGISTIC, SQUARED_ERROR)
MODEL_FORMAT = "ppminspect.boosted_ensemble"
MODEL_VERSION = 1


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    n_rounds: int = 200
    max_depth: int = 6
    learning_rate: float = 0.1
    l2_leaf: float = 1.0
    min_split_gain: float = 0.0
    min_child_hessian: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.l2_leaf < 0 or self.min_split_gain < 0 or self.min_child_hessian < 0:
            raise ValueError("l2_leaf, min_split_gain and min_child_hessian must be >= 0")


@dataclass
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf.

    ``value`` holds the learning-rate-scaled leaf output actually added to
    the prediction.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def leaves(self) -> np.ndarray:
        return np.nonzero(self.feature < 0)[0]

    def depth(self) -> int:
        def walk(node):
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)

    def to_dict(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"leaf": float(self.value[node]), "cover": float(self.cover[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "gain": float(self.gain[node]),
            "cover": float(self.cover[node]),
            "left": self.to_dict(int(self.left[node])),
            "right": self.to_dict(int(self.right[node])),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Tree":
        rows = []

        def visit(d):
            i = len(rows)
            rows.append(None)
            if "leaf" in d:
                rows[i] = (-1, 0.0, -1, -1, d["leaf"], 0.0, d.get("cover", 0.0))
            else:
                lft = visit(d["left"])
                rgt = visit(d["right"])
                rows[i] = (d["feature"], d["threshold"], lft, rgt, 0.0, d["gain"], d.get("cover", 0.0))
            return i

        visit(data)
        cols = list(zip(*rows))
        return cls(
            feature=np.array(cols[0], dtype=np.int64),
            threshold=np.array(cols[1], dtype=float),
            left=np.array(cols[2], dtype=np.int64),
            right=np.array(cols[3], dtype=np.int64),
            value=np.array(cols[4], dtype=float),
            gain=np.array(cols[5], dtype=float),
            cover=np.array(cols[6], dtype=float),
        )


@dataclass
class BoostedEnsemble:
    task: str
    base_score: float
    trees: list[Tree]
    hyperparams: Hyperparams
    feature_names: list[str]
    #: regularised training objective after each round (index 0 = base score only)
    objective_history: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def used_features(self) -> set[int]:
        return {int(f) for t in self.trees for f in t.feature if f >= 0}

    def _flat(self, n_trees: int | None):
        trees = self.trees if n_trees is None else self.trees[:n_trees]
        if not trees:
            empty_i = np.zeros(0, dtype=np.int64)
            return empty_i, np.zeros(0), empty_i, empty_i, np.zeros(0), empty_i
        offsets = np.cumsum([0] + [t.n_nodes for t in trees[:-1]])
        feature = np.concatenate([t.feature for t in trees])
        threshold = np.concatenate([t.threshold for t in trees])
        value = np.concatenate([t.value for t in trees])
        left = np.concatenate([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(trees, offsets)])
        right = np.concatenate([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(trees, offsets)])
        return feature, threshold, left, right, value, offsets.astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "task": self.task,
            "base_score": float(self.base_score),
            "hyperparams": asdict(self.hyperparams),
            "feature_names": list(self.feature_names),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BoostedEnsemble":
        if data.get("format") != MODEL_FORMAT:
            raise ModelError(f"not a serialised ensemble: format={data.get('format')!r}")
        if data.get("version") != MODEL_VERSION:
            raise ModelError(f"unsupported model version {data.get('version')!r}")
        return cls(
            task=data["task"],
            base_score=float(data["base_score"]),
            trees=[Tree.from_dict(t) for t in data["trees"]],
            hyperparams=Hyperparams(**data["hyperparams"]),
            feature_names=list(data["feature_names"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "BoostedEnsemble":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _loss(task: str, raw: np.ndarray, y: np.ndarray) -> float:
    if task == SQUARED_ERROR:
        return float(0.5 * np.sum((raw - y) ** 2))
    # log(1 + e^z) - y z, stable form
    return float(np.sum(np.logaddexp(0.0, raw) - y * raw))


def _grad_hess(task: str, raw: np.ndarray, y: np.ndarray):
    if task == SQUARED_ERROR:
        return raw - y, np.ones_like(raw)
    p = _sigmoid(raw)
    return p - y, p * (1.0 - p)


def _as_arrays(X, y) -> tuple[np.ndarray, np.ndarray, list[str]]:
    if isinstance(X, FeatureMatrix):
        names = X.names
        if y is None:
            y = X.targets
        X = X.values
    else:
        X = np.asarray(X, dtype=float)
        names = [f"f{j}" for j in range(X.shape[1])] if X.ndim == 2 else []
    if y is None:
        raise ModelError("targets are required")
    y = np.asarray([getattr(t, "value", t) for t in y], dtype=float)
    return np.ascontiguousarray(X, dtype=float), y, names


def _grow_tree(X, sorted_idx, g, h, hp: Hyperparams):
    n = X.shape[0]
    lam = hp.l2_leaf
    node_of = np.zeros(n, dtype=np.int64)
    feature, threshold, left, right, value, gain, cover = [], [], [], [], [], [], []

    def new_node():
        for arr, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (value, 0.0), (gain, 0.0), (cover, 0.0)):
            arr.append(v)
        return len(feature) - 1

    level = [new_node()]  # tree ids of this level's nodes; local id = position
    leaf_of_row = np.zeros(n, dtype=np.int64)
    for depth in range(hp.max_depth + 1):
        active = node_of >= 0
        G = np.bincount(node_of[active], weights=g[active], minlength=len(level))
        H = np.bincount(node_of[active], weights=h[active], minlength=len(level))
        if depth < hp.max_depth:
            best_gain, best_f, best_thr = kernels.level_best_splits(
                X, sorted_idx, node_of, g, h, G, H, lam, hp.min_split_gain, hp.min_child_hessian
            )
        else:
            best_f = np.full(len(level), -1)
        next_level = []
        remap = np.full(len(level), -1, dtype=np.int64)
        go_right_id = np.full(len(level), -1, dtype=np.int64)
        for local, tid in enumerate(level):
            cover[tid] = float(H[local])
            if best_f[local] < 0:
                value[tid] = hp.learning_rate * (-G[local] / (H[local] + lam))
                leaf_of_row[node_of == local] = tid
                continue
            feature[tid] = int(best_f[local])
            threshold[tid] = float(best_thr[local])
            gain[tid] = float(best_gain[local])
            lid, rid = new_node(), new_node()
            left[tid], right[tid] = lid, rid
            remap[local] = len(next_level)
            next_level.append(lid)
            go_right_id[local] = len(next_level)
            next_level.append(rid)
        if not next_level:
            break
        rows = np.nonzero(active)[0]
        local = node_of[rows]
        split = best_f[local] >= 0
        new = np.full(n, -1, dtype=np.int64)
        r, loc = rows[split], local[split]
        goes_left = X[r, best_f[loc]] < best_thr[loc]
        new[r] = np.where(goes_left, remap[loc], go_right_id[loc])
        node_of = new
        level = next_level

    tree = Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=float),
        gain=np.array(gain, dtype=float),
        cover=np.array(cover, dtype=float),
    )
    return tree, tree.value[leaf_of_row]


def fit(X, y=None, hp: Hyperparams | None = None, task: str = BINARY_LOGISTIC, feature_names: Sequence[str] | None = None) -> BoostedEnsemble:
    """Train an ensemble on a feature matrix (or 2-D array) and targets.

    Targets may be numbers or ``Outcome``/``RemainingTime`` objects; when ``X``
    is a :class:`FeatureMatrix` its own targets are used by default.
    """
    hp = hp or Hyperparams()
    if task not in TASKS:
        raise ModelError(f"unknown task {task!r}")
    X, y, names = _as_arrays(X, y)
    if feature_names is not None:
        names = list(feature_names)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 1:
        raise ModelError(f"need a 2-D matrix with >= 2 rows and >= 1 column, got shape {X.shape}")
    if len(y) != X.shape[0]:
        raise ModelError(f"{len(y)} targets for {X.shape[0]} rows")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise ModelError("features and targets must be finite")
    # canonical row order: summation order, and so tie-breaking between equal
    # gains, must not depend on how the caller happened to order the rows
    order = np.lexsort(np.vstack([y[None, :], X.T[::-1]]))
    X, y = np.ascontiguousarray(X[order]), y[order]
    if task == BINARY_LOGISTIC:
        if not np.all((y == 0) | (y == 1)):
            raise ModelError("classification targets must be 0/1")
        p = y.mean()
        if p in (0.0, 1.0):
            raise ModelError("classification needs both classes in the training data")
        base = float(np.log(p / (1.0 - p)))
    else:
        base = float(y.mean())

    sorted_idx = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))
    raw = np.full(len(y), base)
    penalty = 0.0
    history = [_loss(task, raw, y)]
    trees = []
    for _ in range(hp.n_rounds):
        g, h = _grad_hess(task, raw, y)
        tree, update = _grow_tree(X, sorted_idx, g, h, hp)
        raw = raw + update
        trees.append(tree)
        penalty += 0.5 * hp.l2_leaf * float(np.sum(tree.value[tree.leaves] ** 2))
        history.append(_loss(task, raw, y) + penalty)
    return BoostedEnsemble(task, base, trees, hp, names, history)


def predict_raw(model: BoostedEnsemble, X, n_trees: int | None = None) -> np.ndarray:
    X = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ModelError(f"matrix width {X.shape[-1] if X.ndim else 0} != model width {model.n_features}")
    flat = model._flat(n_trees)
    return kernels.predict_forest(np.ascontiguousarray(X, dtype=float), *flat, float(model.base_score))


def predict(model: BoostedEnsemble, X, n_trees: int | None = None) -> np.ndarray:
    """Probabilities for classification, seconds for regression."""
    raw = predict_raw(model, X, n_trees)
    return _sigmoid(raw) if model.task == BINARY_LOGISTIC else raw


def objective(model: BoostedEnsemble, X, y, n_trees: int | None = None) -> float:
    """Training loss plus the L2 penalty of the first ``n_trees`` trees."""
    _, y, _ = _as_arrays(X, y)
    trees = model.trees if n_trees is None else model.trees[:n_trees]
    pen = sum(0.5 * model.hyperparams.l2_leaf * float(np.sum(t.value[t.leaves] ** 2)) for t in trees)
    return _loss(model.task, predict_raw(model, X, n_trees), y) + pen
