"""Prefix encodings: static, aggregation, index and engineered temporal features.

Every column carries a structured :class:`FeatureName` whose rendered form
follows a fixed grammar, so downstream inspection can recover activities and
attributes from feature names alone::

    agg__<activity>|<resource>      count of an (activity, resource) pair
    agg__<attr>=<value>             count of a categorical dynamic value
    agg__<attr>_<stat>              max/mean/sum/std of a numeric dynamic attribute
    static__<attr>=<value>          one-hot case attribute
    static__<attr>                  numeric case attribute
    idx__<field>_<k>=<value>        one-hot field of the k-th event
    idx__<attr>_<k>                 numeric attribute of the k-th event
    eng__<name>                     engineered feature

Raw names and values have ``%``, ``|``, ``=`` and runs of ``_`` percent-escaped.
"""
from __future__ import annotations

import bisect
import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence
from urllib.parse import unquote

import numpy as np

from .eventlog import AttributeKind, AttributeSchema, EventLog, MISSING_RESOURCE, ValueType
from .prep import Bucket, Prefix

STATS = ("max", "mean", "sum", "std")
ENGINEERED = ("elapsed_time", "open_cases", "time_since_last_event")
ENCODINGS = ("static", "aggregation", "index", "engineered")

_ALIASES = {"agg": "aggregation", "idx": "index", "eng": "engineered"}


class EncodingError(ValueError):
    pass


def escape(raw: str) -> str:
    out = str(raw).replace("%", "%25").replace("|", "%7C").replace("=", "%3D")
    return re.sub(r"_(?=_)", "%5F", out)


def unescape(text: str) -> str:
    return unquote(text)


@dataclass(frozen=True)
class FeatureName:
    namespace: str
    activity: str | None = None
    resource: str | None = None
    attribute: str | None = None
    value: str | None = None
    position: int | None = None
    statistic: str | None = None
    name: str | None = None

    # constructors -----------------------------------------------------------
    @classmethod
    def agg_pair(cls, activity: str, resource: str) -> "FeatureName":
        return cls("agg", activity=activity, resource=resource)

    @classmethod
    def agg_value(cls, attribute: str, value: str) -> "FeatureName":
        return cls("agg", attribute=attribute, value=value)

    @classmethod
    def agg_stat(cls, attribute: str, statistic: str) -> "FeatureName":
        return cls("agg", attribute=attribute, statistic=statistic)

    @classmethod
    def static(cls, attribute: str, value: str | None = None) -> "FeatureName":
        return cls("static", attribute=attribute, value=value)

    @classmethod
    def idx(cls, field_name: str, position: int, value: str | None = None) -> "FeatureName":
        return cls("idx", attribute=field_name, position=position, value=value)

    @classmethod
    def eng(cls, name: str) -> "FeatureName":
        return cls("eng", name=name)

    # rendering ---------------------------------------------------------------
    def render(self) -> str:
        ns = self.namespace
        if ns == "agg":
            if self.activity is not None:
                return f"agg__{escape(self.activity)}|{escape(self.resource)}"
            if self.statistic is not None:
                return f"agg__{escape(self.attribute)}_{self.statistic}"
            return f"agg__{escape(self.attribute)}={escape(self.value)}"
        if ns == "static":
            if self.value is None:
                return f"static__{escape(self.attribute)}"
            return f"static__{escape(self.attribute)}={escape(self.value)}"
        if ns == "idx":
            head = f"idx__{escape(self.attribute)}_{self.position}"
            return head if self.value is None else f"{head}={escape(self.value)}"
        if ns == "eng":
            return f"eng__{self.name}"
        raise EncodingError(f"unknown namespace {ns!r}")

    def __str__(self) -> str:
        return self.render()

    @classmethod
    def parse(cls, text: str) -> "FeatureName":
        ns, sep, payload = text.partition("__")
        if not sep:
            raise EncodingError(f"not a feature name: {text!r}")
        if ns == "agg":
            if "|" in payload:
                act, res = payload.split("|", 1)
                return cls.agg_pair(unescape(act), unescape(res))
            if "=" in payload:
                attr, val = payload.split("=", 1)
                return cls.agg_value(unescape(attr), unescape(val))
            attr, _, stat = payload.rpartition("_")
            if stat not in STATS or not attr:
                raise EncodingError(f"bad aggregation feature {text!r}")
            return cls.agg_stat(unescape(attr), stat)
        if ns == "static":
            if "=" in payload:
                attr, val = payload.split("=", 1)
                return cls.static(unescape(attr), unescape(val))
            return cls.static(unescape(payload))
        if ns == "idx":
            head, eq, val = payload.partition("=")
            fld, _, pos = head.rpartition("_")
            if not fld or not pos.isdigit():
                raise EncodingError(f"bad index feature {text!r}")
            return cls.idx(unescape(fld), int(pos), unescape(val) if eq else None)
        if ns == "eng":
            return cls.eng(payload)
        raise EncodingError(f"unknown namespace in {text!r}")

    # helpers used by explanation and inspection --------------------------------
    @property
    def activity_ref(self) -> str | None:
        """Activity this feature is about, if any."""
        if self.namespace == "agg" and self.activity is not None:
            return self.activity
        if self.namespace == "idx" and self.attribute == "activity" and self.value is not None:
            return self.value
        return None

    @property
    def is_indicator(self) -> bool:
        """Count or one-hot column (interpreted by presence, not magnitude)."""
        if self.namespace == "agg":
            return self.statistic is None
        return self.namespace in ("static", "idx") and self.value is not None


@dataclass
class FeatureMatrix:
    columns: list[FeatureName]
    values: np.ndarray
    row_ids: list[tuple[str, int]]
    targets: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.row_ids), len(self.columns))
        names = self.names
        if len(set(names)) != len(names):
            raise EncodingError("duplicate column names in feature matrix")

    @property
    def names(self) -> list[str]:
        return [c.render() for c in self.columns]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def row_index(self, case_id: str, length: int) -> int:
        return self.row_ids.index((case_id, length))

    def sorted_columns(self) -> "FeatureMatrix":
        order = sorted(range(len(self.columns)), key=lambda j: self.columns[j].render())
        return FeatureMatrix([self.columns[j] for j in order], self.values[:, order], self.row_ids, self.targets)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.names)
            for row in self.values:
                writer.writerow([repr(float(v)) for v in row])


def hstack(parts: Sequence[FeatureMatrix]) -> FeatureMatrix:
    if not parts:
        raise EncodingError("nothing to stack")
    rows = parts[0].row_ids
    for p in parts[1:]:
        if p.row_ids != rows:
            raise EncodingError("row ids differ between stacked matrices")
    columns = [c for p in parts for c in p.columns]
    values = np.hstack([p.values for p in parts]) if columns else np.zeros((len(rows), 0))
    return FeatureMatrix(columns, values, rows, parts[0].targets).sorted_columns()


# --- vocabulary --------------------------------------------------------------


@dataclass(frozen=True)
class Vocabulary:
    """Category sets frozen on training data; unseen values encode as zeros."""

    pairs: tuple[tuple[str, str], ...] = ()
    activities: tuple[str, ...] = ()
    resources: tuple[str, ...] = ()
    dynamic_categories: dict = field(default_factory=dict)
    dynamic_numeric: tuple[str, ...] = ()
    static_categories: dict = field(default_factory=dict)
    static_numeric: tuple[str, ...] = ()

    @classmethod
    def fit(cls, items: Iterable, schema: AttributeSchema) -> "Vocabulary":
        """Build from traces or prefixes (anything exposing ``events``)."""
        dyn_cat = schema.names(AttributeKind.DYNAMIC, ValueType.CATEGORICAL)
        st_cat = schema.names(AttributeKind.STATIC, ValueType.CATEGORICAL)
        pairs, acts, ress = set(), set(), set()
        dyn_vals = {a: set() for a in dyn_cat}
        st_vals = {a: set() for a in st_cat}
        for item in items:
            trace = item.trace if isinstance(item, Prefix) else item
            for a in st_cat:
                if a in trace.static_attrs:
                    st_vals[a].add(str(trace.static_attrs[a]))
            for ev in item.events:
                res = ev.resource_token
                pairs.add((ev.activity, res))
                acts.add(ev.activity)
                ress.add(res)
                for a in dyn_cat:
                    if a in ev.attrs:
                        dyn_vals[a].add(str(ev.attrs[a]))
        return cls(
            pairs=tuple(sorted(pairs)),
            activities=tuple(sorted(acts)),
            resources=tuple(sorted(ress)),
            dynamic_categories={a: tuple(sorted(v)) for a, v in dyn_vals.items()},
            dynamic_numeric=tuple(schema.names(AttributeKind.DYNAMIC, ValueType.NUMERIC)),
            static_categories={a: tuple(sorted(v)) for a, v in st_vals.items()},
            static_numeric=tuple(schema.names(AttributeKind.STATIC, ValueType.NUMERIC)),
        )


def _vocab(bucket: Bucket, schema: AttributeSchema, vocab: Vocabulary | None) -> Vocabulary:
    return vocab if vocab is not None else Vocabulary.fit(bucket.prefixes, schema)


def _targets(bucket: Bucket) -> np.ndarray:
    return np.array([p.target.value for p in bucket.prefixes], dtype=float)


def _matrix(bucket: Bucket, columns: list[FeatureName], values: np.ndarray) -> FeatureMatrix:
    return FeatureMatrix(columns, values, [p.row_id for p in bucket.prefixes], _targets(bucket)).sorted_columns()


# --- static ------------------------------------------------------------------


def encode_static(bucket: Bucket, schema: AttributeSchema, vocab: Vocabulary | None = None) -> FeatureMatrix:
    """Numeric case attributes as-is, categorical ones one-hot."""
    vocab = _vocab(bucket, schema, vocab)
    columns: list[FeatureName] = [FeatureName.static(a) for a in vocab.static_numeric]
    slot = {}
    for a, values in vocab.static_categories.items():
        for v in values:
            slot[(a, v)] = len(columns)
            columns.append(FeatureName.static(a, v))
    X = np.zeros((len(bucket), len(columns)))
    for r, p in enumerate(bucket.prefixes):
        st = p.trace.static_attrs
        for j, a in enumerate(vocab.static_numeric):
            X[r, j] = float(st.get(a, 0.0))
        for a in vocab.static_categories:
            j = slot.get((a, str(st[a]))) if a in st else None
            if j is not None:
                X[r, j] = 1.0
    return _matrix(bucket, columns, X)


# --- aggregation -------------------------------------------------------------


def _numeric_stats(values: np.ndarray) -> tuple[float, float, float, float]:
    if values.size == 0:
        return 0.0, 0.0, 0.0, 0.0
    total = float(values.sum())
    mean = total / values.size
    std = float(np.sqrt(np.mean((values - mean) ** 2)))
    return float(values.max()), mean, total, std


def encode_aggregation(
    bucket: Bucket, schema: AttributeSchema, vocab: Vocabulary | None = None
) -> FeatureMatrix:
    """Order-free prefix summary: pair counts, categorical value counts, numeric stats.

    A numeric attribute never observed in the prefix yields zeros for all four
    statistics.
    """
    vocab = _vocab(bucket, schema, vocab)
    columns: list[FeatureName] = []
    pair_slot, value_slot = {}, {}
    for act, res in vocab.pairs:
        pair_slot[(act, res)] = len(columns)
        columns.append(FeatureName.agg_pair(act, res))
    for a, values in vocab.dynamic_categories.items():
        for v in values:
            value_slot[(a, v)] = len(columns)
            columns.append(FeatureName.agg_value(a, v))
    stat_base = len(columns)
    for a in vocab.dynamic_numeric:
        columns.extend(FeatureName.agg_stat(a, s) for s in STATS)

    X = np.zeros((len(bucket), len(columns)))
    cache: dict[str, tuple[np.ndarray, dict]] = {}
    for r, p in enumerate(bucket.prefixes):
        trace = p.trace
        if trace.case_id not in cache:
            n = len(trace)
            counts = np.zeros((n, stat_base))
            numeric = {a: ([], []) for a in vocab.dynamic_numeric}
            for i, ev in enumerate(trace.events):
                j = pair_slot.get((ev.activity, ev.resource_token))
                if j is not None:
                    counts[i, j] += 1.0
                for a in vocab.dynamic_categories:
                    if a in ev.attrs:
                        j = value_slot.get((a, str(ev.attrs[a])))
                        if j is not None:
                            counts[i, j] += 1.0
                for a in vocab.dynamic_numeric:
                    if a in ev.attrs:
                        numeric[a][0].append(i)
                        numeric[a][1].append(float(ev.attrs[a]))
            numeric = {a: (np.array(pos, dtype=int), np.array(vals)) for a, (pos, vals) in numeric.items()}
            cache[trace.case_id] = (np.cumsum(counts, axis=0), numeric)
        cum, numeric = cache[trace.case_id]
        L = p.length
        X[r, :stat_base] = cum[L - 1]
        for k, a in enumerate(vocab.dynamic_numeric):
            pos, vals = numeric[a]
            X[r, stat_base + 4 * k : stat_base + 4 * k + 4] = _numeric_stats(vals[pos < L])
    return _matrix(bucket, columns, X)


# --- index -------------------------------------------------------------------


def encode_index(bucket: Bucket, schema: AttributeSchema, vocab: Vocabulary | None = None) -> FeatureMatrix:
    """Position-wise one-hot of activity, resource and categorical attributes."""
    if bucket.scheme != "prefix_length" or bucket.length is None:
        raise EncodingError("index encoding needs a prefix-length bucket")
    L = bucket.length
    vocab = _vocab(bucket, schema, vocab)
    fields = [("activity", vocab.activities), ("resource", vocab.resources)]
    fields += [(a, vals) for a, vals in vocab.dynamic_categories.items()]
    columns: list[FeatureName] = []
    slot = {}
    for k in range(1, L + 1):
        for fld, values in fields:
            for v in values:
                slot[(fld, k, v)] = len(columns)
                columns.append(FeatureName.idx(fld, k, v))
        for a in vocab.dynamic_numeric:
            slot[(a, k, None)] = len(columns)
            columns.append(FeatureName.idx(a, k))

    X = np.zeros((len(bucket), len(columns)))
    for r, p in enumerate(bucket.prefixes):
        if p.length != L:
            raise EncodingError(f"prefix {p.row_id} has length {p.length} in bucket of length {L}")
        for k, ev in enumerate(p.events, start=1):
            hits = [("activity", ev.activity), ("resource", ev.resource_token)]
            hits += [(a, str(ev.attrs[a])) for a in vocab.dynamic_categories if a in ev.attrs]
            for fld, v in hits:
                j = slot.get((fld, k, v))
                if j is not None:
                    X[r, j] = 1.0
            for a in vocab.dynamic_numeric:
                if a in ev.attrs:
                    X[r, slot[(a, k, None)]] = float(ev.attrs[a])
    return _matrix(bucket, columns, X)


# --- engineered --------------------------------------------------------------


class OpenCaseIndex:
    """Sorted case start/end times answering "how many cases are open at t"."""

    def __init__(self, log: EventLog):
        self.starts = sorted(t.start for t in log)
        self.ends = sorted(t.end for t in log)
        self.case_ids = set(log.case_ids)

    def open_at(self, t: float) -> int:
        return bisect.bisect_right(self.starts, t) - bisect.bisect_left(self.ends, t)

    def others_open(self, case_id: str, t: float) -> int:
        n = self.open_at(t)
        # a prefix time always lies inside its own case interval
        return n - 1 if case_id in self.case_ids else n


def engineered_features(prefix: Prefix, log: EventLog, index: OpenCaseIndex | None = None) -> dict[str, float]:
    index = index if index is not None else OpenCaseIndex(log)
    times = prefix.trace.times
    i = prefix.length
    t_i = float(times[i - 1])
    return {
        "elapsed_time": t_i - float(times[0]),
        "time_since_last_event": t_i - float(times[i - 2]) if i > 1 else 0.0,
        "open_cases": float(index.others_open(prefix.case_id, t_i)),
    }


def encode_engineered(bucket: Bucket, log: EventLog) -> FeatureMatrix:
    index = OpenCaseIndex(log)
    columns = [FeatureName.eng(n) for n in ENGINEERED]
    X = np.zeros((len(bucket), len(columns)))
    for r, p in enumerate(bucket.prefixes):
        feats = engineered_features(p, log, index)
        X[r] = [feats[n] for n in ENGINEERED]
    return _matrix(bucket, columns, X)


# --- composition -------------------------------------------------------------


def normalize_encodings(names: Iterable[str]) -> tuple[str, ...]:
    out = []
    for n in names:
        n = _ALIASES.get(n, n)
        if n not in ENCODINGS:
            raise EncodingError(f"unknown encoding {n!r}")
        if n not in out:
            out.append(n)
    return tuple(out)


def encode_bucket(
    bucket: Bucket,
    schema: AttributeSchema,
    encodings: Iterable[str],
    vocab: Vocabulary | None = None,
    log: EventLog | None = None,
) -> FeatureMatrix:
    """Concatenate the requested encodings; columns end up in lexicographic order."""
    encodings = normalize_encodings(encodings)
    vocab = _vocab(bucket, schema, vocab)
    parts = []
    for enc in encodings:
        if enc == "static":
            parts.append(encode_static(bucket, schema, vocab))
        elif enc == "aggregation":
            parts.append(encode_aggregation(bucket, schema, vocab))
        elif enc == "index":
            parts.append(encode_index(bucket, schema, vocab))
        elif enc == "engineered":
            if log is None:
                raise EncodingError("engineered features need the event log")
            parts.append(encode_engineered(bucket, log))
    return hstack(parts)


def sparsity_report(matrix: FeatureMatrix) -> tuple[int, float]:
    """(feature count, fraction of non-zero cells)."""
    n, m = matrix.shape
    if n == 0 or m == 0:
        raise EncodingError("sparsity of an empty matrix is undefined")
    return m, float(np.count_nonzero(matrix.values)) / (n * m)


def expected_aggregation_width(vocab: Vocabulary) -> int:
    return (
        len(vocab.pairs)
        + sum(len(v) for v in vocab.dynamic_categories.values())
        + len(STATS) * len(vocab.dynamic_numeric)
    )
