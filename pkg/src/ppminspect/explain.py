"""Global (gain, permutation) and local (weighted linear surrogate) explanations."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import gbdt
from .encode import EncodingError, FeatureMatrix, FeatureName
from .metrics import auc, mae

BlackBox = Union[gbdt.BoostedEnsemble, Callable[[np.ndarray], np.ndarray]]


class ExplanationError(ValueError):
    pass


# --- global ------------------------------------------------------------------


@dataclass
class GlobalExplanation:
    method: str  # "gain" | "permutation"
    ranking: list[tuple[str, float]]
    metric: str | None = None
    #: unclamped permutation deltas per feature (permutation method only)
    raw: dict[str, float] = field(default_factory=dict)
    seed: int | None = None
    repeats: int | None = None

    def importance(self, name: str) -> float:
        return dict(self.ranking).get(name, 0.0)

    def top(self, k: int) -> list[tuple[str, float]]:
        """The k most important features with strictly positive importance."""
        return [(n, v) for n, v in self.ranking if v > 0][:k]

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "metric": self.metric,
            "ranking": [{"feature": n, "importance": v} for n, v in self.ranking],
        }
        if self.method == "permutation":
            out["raw"] = dict(sorted(self.raw.items()))
            out["seed"] = self.seed
            out["repeats"] = self.repeats
        return out


def _rank(scores: dict[str, float]) -> list[tuple[str, float]]:
    return sorted(((n, v) for n, v in scores.items() if v > 0), key=lambda nv: (-nv[1], nv[0]))


def gain_importance(model: gbdt.BoostedEnsemble) -> GlobalExplanation:
    """Total split gain per feature over all trees, normalised to sum to one."""
    totals = np.zeros(model.n_features)
    for tree in model.trees:
        internal = tree.feature >= 0
        np.add.at(totals, tree.feature[internal], tree.gain[internal])
    grand = totals.sum()
    if grand <= 0:
        return GlobalExplanation("gain", [])
    return GlobalExplanation(
        "gain", _rank({model.feature_names[j]: float(totals[j] / grand) for j in np.nonzero(totals)[0]})
    )


def permutation_importance(
    model: gbdt.BoostedEnsemble,
    matrix,
    targets=None,
    metric: str | None = None,
    repeats: int = 5,
    seed: int = 0,
) -> GlobalExplanation:
    """Mean metric degradation when one column at a time is shuffled.

    For AUC the degradation is baseline minus shuffled score, for MAE the
    shuffled error minus the baseline. Negative means are kept in ``raw`` and
    clamped to zero in the ranking.
    """
    if repeats < 1:
        raise ExplanationError("repeats must be >= 1")
    expected = "auc" if model.task == gbdt.BINARY_LOGISTIC else "mae"
    metric = metric or expected
    if metric != expected:
        raise ExplanationError(f"metric {metric!r} does not fit task {model.task!r}")
    if isinstance(matrix, FeatureMatrix):
        targets = matrix.targets if targets is None else targets
        X = matrix.values
    else:
        X = np.asarray(matrix, dtype=float)
    y = np.asarray([getattr(t, "value", t) for t in targets], dtype=float)
    score = auc if metric == "auc" else mae
    sign = 1.0 if metric == "auc" else -1.0
    baseline = score(gbdt.predict(model, X), y)
    rng = np.random.default_rng(seed)
    raw = {}
    for j, name in enumerate(model.feature_names):
        deltas = []
        for _ in range(repeats):
            Xp = X.copy()
            Xp[:, j] = X[rng.permutation(len(X)), j]
            deltas.append(sign * (baseline - score(gbdt.predict(model, Xp), y)))
        raw[name] = float(np.mean(deltas))
    return GlobalExplanation(
        "permutation",
        _rank({n: max(v, 0.0) for n, v in raw.items()}),
        metric=metric,
        raw=raw,
        seed=seed,
        repeats=repeats,
    )


# --- local -------------------------------------------------------------------

INDICATOR = "indicator"
NUMERIC = "numeric"


@dataclass
class TrainingStats:
    """Per-feature quartile bins and marginals of the training matrix."""

    names: list[str]
    kinds: list[str]
    #: interior quartile edges (numeric features)
    edges: list[np.ndarray]
    bin_probs: list[np.ndarray]
    lows: np.ndarray
    highs: np.ndarray
    presence: np.ndarray
    positive_mean: np.ndarray
    usable: np.ndarray

    @classmethod
    def from_matrix(cls, matrix, names: Sequence[str] | None = None, kinds: Sequence[str] | None = None) -> "TrainingStats":
        if isinstance(matrix, FeatureMatrix):
            names = matrix.names
            X = matrix.values
        else:
            X = np.asarray(matrix, dtype=float)
            names = list(names) if names is not None else [f"f{j}" for j in range(X.shape[1])]
        if kinds is None:
            kinds = [_infer_kind(n, X[:, j]) for j, n in enumerate(names)]
        m = X.shape[1]
        edges, probs = [], []
        usable = np.zeros(m, dtype=bool)
        presence = (X > 0).mean(axis=0)
        positive_mean = np.array(
            [X[X[:, j] > 0, j].mean() if np.any(X[:, j] > 0) else 1.0 for j in range(m)]
        )
        for j in range(m):
            col = X[:, j]
            if kinds[j] == INDICATOR:
                edges.append(np.zeros(0))
                probs.append(np.array([1.0 - presence[j], presence[j]]))
                usable[j] = 0.0 < presence[j] < 1.0
            else:
                e = np.unique(np.quantile(col, [0.25, 0.5, 0.75]))
                b = np.bincount(np.searchsorted(e, col, side="left"), minlength=len(e) + 1) / len(col)
                edges.append(e)
                probs.append(b)
                usable[j] = np.count_nonzero(b) > 1
        return cls(list(names), list(kinds), edges, probs, X.min(axis=0), X.max(axis=0), presence, positive_mean, usable)

    def bin_of(self, j: int, x: float) -> int:
        if self.kinds[j] == INDICATOR:
            return int(x > 0)
        return int(np.searchsorted(self.edges[j], x, side="left"))

    def bin_bounds(self, j: int, b: int) -> tuple[float, float]:
        e = self.edges[j]
        lo = self.lows[j] if b == 0 else e[b - 1]
        hi = self.highs[j] if b == len(e) else e[b]
        return float(lo), float(hi)


def _infer_kind(name: str, col: np.ndarray) -> str:
    try:
        return INDICATOR if FeatureName.parse(name).is_indicator else NUMERIC
    except EncodingError:
        is_count = np.all(col >= 0) and np.all(col == np.round(col))
        return INDICATOR if is_count else NUMERIC


@dataclass(frozen=True)
class LocalConfig:
    n_samples: int = 5000
    k: int = 10
    kernel_width: float | None = None
    ridge: float = 1e-3


def _fmt(v: float) -> str:
    return f"{v:.6g}"


@dataclass(frozen=True)
class Attribution:
    feature: str
    op: str  # "≤", ">" or "="
    value: str
    weight: float

    @property
    def condition(self) -> str:
        return f"{self.feature} {self.op} {self.value}"

    @property
    def asserts_absence(self) -> bool:
        return self.op == "≤" and float(self.value) <= 0.0


def parse_condition(text: str) -> tuple[str, str, str]:
    for op in (" ≤ ", " > ", " = "):
        if op in text:
            feat, value = text.rsplit(op, 1)
            return feat, op.strip(), value
    raise ExplanationError(f"unparseable condition {text!r}")


@dataclass
class LocalExplanation:
    row_id: tuple[str, int] | None
    prediction: float
    attributions: list[Attribution]
    intercept: float
    local_fidelity: float
    seed: int | None = None
    kernel_width: float | None = None
    n_samples: int | None = None

    def to_dict(self) -> dict:
        return {
            "row_id": {"case_id": self.row_id[0], "prefix_length": self.row_id[1]} if self.row_id else None,
            "prediction": self.prediction,
            "intercept": self.intercept,
            "local_fidelity": self.local_fidelity,
            "attributions": [{"condition": a.condition, "feature": a.feature, "weight": a.weight} for a in self.attributions],
            "seed": self.seed,
            "kernel_width": self.kernel_width,
            "n_samples": self.n_samples,
        }


@dataclass
class SurrogateSample:
    """Perturbation sample behind a local explanation (for auditing)."""

    features: np.ndarray  # indices of the interpretable features
    Z: np.ndarray  # 1 = same side/bin as the instance
    X: np.ndarray  # raw-space samples fed to the black box
    y: np.ndarray
    weights: np.ndarray
    selected: np.ndarray  # column indices into Z used by the surrogate


def _black_box(model: BlackBox) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(model, gbdt.BoostedEnsemble):
        return lambda X: gbdt.predict(model, X)
    return lambda X: np.asarray(model(X), dtype=float)


def _weighted_corr(Z: np.ndarray, y: np.ndarray, w: np.ndarray) -> np.ndarray:
    sw = w.sum()
    zc = Z - (w @ Z) / sw
    yc = y - (w @ y) / sw
    cov = w @ (zc * yc[:, None])
    var_z = w @ (zc * zc)
    var_y = w @ (yc * yc)
    denom = np.sqrt(var_z * var_y)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom > 0, cov / denom, 0.0)
    return out


def weighted_ridge(Z: np.ndarray, y: np.ndarray, w: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    """Weighted ridge with an unpenalised intercept, solved as augmented least squares."""
    sw = w.sum()
    zm = (w @ Z) / sw
    ym = float(w @ y) / sw
    s = np.sqrt(w)[:, None]
    A = np.vstack([s * (Z - zm), np.sqrt(alpha) * np.eye(Z.shape[1])])
    b = np.concatenate([s[:, 0] * (y - ym), np.zeros(Z.shape[1])])
    coef = np.linalg.lstsq(A, b, rcond=None)[0]
    return coef, ym - float(zm @ coef)


def explain_local(
    model: BlackBox,
    instance,
    stats: TrainingStats,
    config: LocalConfig | None = None,
    seed: int = 0,
    row_id: tuple[str, int] | None = None,
    return_sample: bool = False,
):
    """Fit a weighted linear surrogate around one encoded prefix.

    Each usable feature becomes a binary "same side as the instance"
    coordinate: presence for count/one-hot features, quartile bin for numeric
    ones. Positive weights push the prediction up.
    """
    cfg = config or LocalConfig()
    x0 = np.asarray(instance, dtype=float).ravel()
    if x0.size != len(stats.names):
        raise ExplanationError(f"instance width {x0.size} != training width {len(stats.names)}")
    if isinstance(model, gbdt.BoostedEnsemble) and model.n_features != x0.size:
        raise ExplanationError(f"instance width {x0.size} != model width {model.n_features}")
    f = _black_box(model)
    rng = np.random.default_rng(seed)
    feats = np.nonzero(stats.usable)[0]
    M = len(feats)
    n = cfg.n_samples
    width = cfg.kernel_width if cfg.kernel_width is not None else 0.75 * np.sqrt(max(M, 1))

    inst_bins = np.array([stats.bin_of(j, x0[j]) for j in feats], dtype=int)
    X = np.tile(x0, (n, 1))
    Z = np.ones((n, M))
    for c, j in enumerate(feats):
        probs = stats.bin_probs[j]
        drawn = rng.choice(len(probs), size=n, p=probs)
        drawn[0] = inst_bins[c]  # first sample is the instance itself
        Z[:, c] = (drawn == inst_bins[c]).astype(float)
        if stats.kinds[j] == INDICATOR:
            on_value = x0[j] if x0[j] > 0 else stats.positive_mean[j]
            X[1:, j] = np.where(drawn[1:] == 1, on_value, 0.0)
        else:
            lo_hi = np.array([stats.bin_bounds(j, b) for b in range(len(probs))])
            X[1:, j] = rng.uniform(lo_hi[drawn[1:], 0], lo_hi[drawn[1:], 1])
    y = f(X)
    d2 = np.sum((1.0 - Z) ** 2, axis=1)
    w = np.exp(-d2 / width**2)

    prediction = float(y[0])
    if M == 0:
        expl = LocalExplanation(row_id, prediction, [], prediction, 1.0, seed, float(width), n)
        return (expl, SurrogateSample(feats, Z, X, y, w, np.zeros(0, dtype=int))) if return_sample else expl

    corr = np.abs(_weighted_corr(Z, y, w))
    order = sorted(range(M), key=lambda c: (-corr[c], c))
    selected = np.array(sorted(order[: min(cfg.k, M)]), dtype=int)
    if np.ptp(y) == 0:
        # a flat response carries no attribution; skip the float noise of the solve
        coef, intercept = np.zeros(len(selected)), prediction
    else:
        coef, intercept = weighted_ridge(Z[:, selected], y, w, cfg.ridge)

    fitted = intercept + Z[:, selected] @ coef
    ym = (w @ y) / w.sum()
    ss_tot = float(w @ (y - ym) ** 2)
    ss_res = float(w @ (y - fitted) ** 2)
    fidelity = 1.0 if ss_tot <= 0 else 1.0 - ss_res / ss_tot

    attributions = []
    for c, beta in zip(selected, coef):
        j = feats[c]
        name = stats.names[j]
        if stats.kinds[j] == INDICATOR:
            op, value = ("≤", "0") if inst_bins[c] == 0 else (">", "0")
        else:
            b, e = inst_bins[c], stats.edges[j]
            if b == 0:
                op, value = "≤", _fmt(e[0])
            elif b == len(e):
                op, value = ">", _fmt(e[-1])
            else:
                op, value = "=", f"({_fmt(e[b - 1])}, {_fmt(e[b])}]"
        attributions.append(Attribution(name, op, value, float(beta)))
    attributions.sort(key=lambda a: (-abs(a.weight), a.feature))
    expl = LocalExplanation(row_id, prediction, attributions, float(intercept), float(fidelity), seed, float(width), n)
    if return_sample:
        return expl, SurrogateSample(feats, Z, X, y, w, selected)
    return expl
