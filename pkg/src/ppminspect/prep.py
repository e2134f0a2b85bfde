"""Prefix extraction, prediction targets, bucketing and the temporal split."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Union

from .eventlog import EventLog, Event, LabelSpec, Trace, evaluate_label

REMAINING_TIME = "remaining_time"
TargetKind = Union[LabelSpec, Literal["remaining_time"]]


@dataclass(frozen=True)
class Outcome:
    positive: bool

    @property
    def value(self) -> float:
        return 1.0 if self.positive else 0.0


@dataclass(frozen=True)
class RemainingTime:
    seconds: float

    def __post_init__(self):
        if self.seconds < 0:
            raise ValueError(f"remaining time must be non-negative, got {self.seconds}")

    @property
    def value(self) -> float:
        return self.seconds


PredictionTarget = Union[Outcome, RemainingTime]


@dataclass(frozen=True)
class Prefix:
    trace: Trace
    length: int
    target: PredictionTarget

    def __post_init__(self):
        if not 1 <= self.length <= len(self.trace):
            raise ValueError(f"prefix length {self.length} outside 1..{len(self.trace)}")

    @property
    def case_id(self) -> str:
        return self.trace.case_id

    @property
    def events(self) -> tuple[Event, ...]:
        return self.trace.events[: self.length]

    @property
    def row_id(self) -> tuple[str, int]:
        return (self.trace.case_id, self.length)


@dataclass(frozen=True)
class Bucket:
    id: str
    scheme: Literal["single", "prefix_length"]
    prefixes: tuple[Prefix, ...]
    length: int | None = None

    def __len__(self) -> int:
        return len(self.prefixes)


def compute_remaining_time(trace: Trace, i: int) -> float:
    """Seconds between the i-th (1-based) and the last event of the trace."""
    if not 1 <= i <= len(trace):
        raise ValueError(f"prefix length {i} outside 1..{len(trace)}")
    return float(trace.times[-1] - trace.times[i - 1])


def prefix_lengths(n: int, min_len: int, max_len: int, gap: int) -> range:
    return range(min_len, min(n, max_len) + 1, gap)


def extract_prefixes(
    log: EventLog | Iterable[Trace],
    min_len: int = 1,
    max_len: int = 40,
    gap: int = 1,
    target: TargetKind = REMAINING_TIME,
) -> list[Prefix]:
    """Cut every trace at lengths min_len, min_len+gap, ... up to min(n, max_len).

    Outcome targets are evaluated once on the complete trace and shared by all
    of its prefixes; remaining time is recomputed for each length.
    """
    if not 1 <= min_len <= max_len:
        raise ValueError(f"need 1 <= min_len <= max_len, got {min_len}, {max_len}")
    if gap < 1:
        raise ValueError(f"gap must be >= 1, got {gap}")
    out = []
    for trace in log:
        if target == REMAINING_TIME:
            for i in prefix_lengths(len(trace), min_len, max_len, gap):
                out.append(Prefix(trace, i, RemainingTime(compute_remaining_time(trace, i))))
        else:
            label = Outcome(evaluate_label(trace, target))
            for i in prefix_lengths(len(trace), min_len, max_len, gap):
                out.append(Prefix(trace, i, label))
    return out


def bucket_single(prefixes: list[Prefix]) -> list[Bucket]:
    if not prefixes:
        raise ValueError("cannot bucket an empty prefix list")
    return [Bucket("single", "single", tuple(prefixes))]


def bucket_id_for_length(length: int) -> str:
    return f"prefix_{length}"


def bucket_by_prefix_length(prefixes: list[Prefix]) -> list[Bucket]:
    if not prefixes:
        raise ValueError("cannot bucket an empty prefix list")
    groups: dict[int, list[Prefix]] = {}
    for p in prefixes:
        groups.setdefault(p.length, []).append(p)
    return [
        Bucket(bucket_id_for_length(L), "prefix_length", tuple(groups[L]), length=L)
        for L in sorted(groups)
    ]


def make_buckets(prefixes: list[Prefix], scheme: str) -> list[Bucket]:
    if scheme == "single":
        return bucket_single(prefixes)
    if scheme == "prefix_length":
        return bucket_by_prefix_length(prefixes)
    raise ValueError(f"unknown bucketing scheme {scheme!r}")


def temporal_split(log: EventLog, train_ratio: float) -> tuple[list[str], list[str]]:
    """Earliest-starting ceil(ratio * #cases) cases train, the rest test.

    Start-time ties are broken by case id. Both sides always keep at least one
    case.
    """
    if len(log) < 2:
        raise ValueError(f"temporal split needs at least 2 cases, got {len(log)}")
    if not 0.0 < train_ratio < 1.0:
        raise ValueError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    ordered = sorted(log, key=lambda t: (t.start, t.case_id))
    # the epsilon absorbs products like 0.7 * 10 = 7.000000000000001
    n_train = math.ceil(train_ratio * len(ordered) - 1e-9)
    n_train = min(max(n_train, 1), len(ordered) - 1)
    return [t.case_id for t in ordered[:n_train]], [t.case_id for t in ordered[n_train:]]
