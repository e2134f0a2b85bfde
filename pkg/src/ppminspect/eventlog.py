"""In-memory event log: events, traces, attribute schema and labelling rules."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, Mapping, Union

import numpy as np

Value = Union[str, float]

#: token used wherever a resource is missing so that encoders stay total
MISSING_RESOURCE = "⊥"


class LogError(ValueError):
    """Raised when events cannot form a valid event log."""


# fractional seconds of any length; fromisoformat on 3.10 wants exactly 3 or 6 digits
_FRACTION = re.compile(r"(\d{2}:\d{2}:\d{2})[.,](\d+)")


def _parse_iso(text: str) -> datetime:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    text = _FRACTION.sub(lambda m: f"{m.group(1)}.{(m.group(2) + '000000')[:6]}", text, count=1)
    return datetime.fromisoformat(text)


def to_utc(value) -> datetime:
    """Coerce a datetime, ISO string or epoch seconds to a UTC datetime at ms precision."""
    if isinstance(value, datetime):
        ts = value if value.tzinfo is not None else value.replace(tzinfo=timezone.utc)
        ts = ts.astimezone(timezone.utc)
    elif isinstance(value, str):
        try:
            ts = _parse_iso(value)
        except ValueError as exc:
            raise LogError(f"unparseable timestamp {value!r}") from exc
        return to_utc(ts)
    elif isinstance(value, (int, float, np.integer, np.floating)):
        if not math.isfinite(float(value)):
            raise LogError(f"non-finite timestamp {value!r}")
        ms = round(float(value) * 1000.0)
        ts = datetime.fromtimestamp(ms / 1000.0, tz=timezone.utc)
    else:
        raise LogError(f"unparseable timestamp {value!r}")
    return ts.replace(microsecond=(ts.microsecond // 1000) * 1000)


def epoch_seconds(ts: datetime) -> float:
    return ts.timestamp()


def parse_number(value) -> float | None:
    """Return ``value`` as a finite float, or None if it is not numeric."""
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float, np.integer, np.floating)):
        out = float(value)
    elif isinstance(value, str):
        try:
            out = float(value.strip())
        except ValueError:
            return None
    else:
        return None
    return out if math.isfinite(out) else None


@dataclass(frozen=True)
class Event:
    case_id: str
    activity: str
    timestamp: datetime
    resource: str | None = None
    attrs: Mapping[str, Value] = field(default_factory=dict)

    def __post_init__(self):
        if not self.case_id:
            raise LogError("event has empty case_id")
        if not self.activity:
            raise LogError(f"event of case {self.case_id!r} has empty activity")
        object.__setattr__(self, "case_id", str(self.case_id))
        object.__setattr__(self, "timestamp", to_utc(self.timestamp))
        # missing values are dropped rather than stored as None
        object.__setattr__(
            self, "attrs", {k: v for k, v in dict(self.attrs).items() if v is not None and v != ""}
        )

    @property
    def seconds(self) -> float:
        return epoch_seconds(self.timestamp)

    @property
    def resource_token(self) -> str:
        return self.resource if self.resource else MISSING_RESOURCE


class AttributeKind(str, Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


class ValueType(str, Enum):
    CATEGORICAL = "categorical"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class AttributeSpec:
    kind: AttributeKind
    value_type: ValueType


@dataclass(frozen=True)
class AttributeSchema:
    attributes: Mapping[str, AttributeSpec] = field(default_factory=dict)

    def names(self, kind: AttributeKind | None = None, value_type: ValueType | None = None) -> list[str]:
        return sorted(
            name
            for name, spec in self.attributes.items()
            if (kind is None or spec.kind == kind) and (value_type is None or spec.value_type == value_type)
        )

    def __getitem__(self, name: str) -> AttributeSpec:
        return self.attributes[name]

    def __contains__(self, name: str) -> bool:
        return name in self.attributes

    def to_dict(self) -> dict:
        return {
            name: {"kind": spec.kind.value, "value_type": spec.value_type.value}
            for name, spec in sorted(self.attributes.items())
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Mapping[str, str]]) -> "AttributeSchema":
        return cls(
            {
                name: AttributeSpec(AttributeKind(spec["kind"]), ValueType(spec["value_type"]))
                for name, spec in data.items()
            }
        )


@dataclass(frozen=True)
class Trace:
    case_id: str
    events: tuple[Event, ...]
    static_attrs: Mapping[str, Value] = field(default_factory=dict)

    def __post_init__(self):
        if not self.events:
            raise LogError(f"trace {self.case_id!r} has no events")
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "_times", np.array([e.seconds for e in self.events], dtype=float))

    def __len__(self) -> int:
        return len(self.events)

    @property
    def times(self) -> np.ndarray:
        """Epoch seconds of every event, ascending."""
        return self._times

    @property
    def activities(self) -> list[str]:
        return [e.activity for e in self.events]

    @property
    def start(self) -> float:
        return float(self._times[0])

    @property
    def end(self) -> float:
        return float(self._times[-1])


@dataclass(frozen=True)
class EventLog:
    traces: tuple[Trace, ...]
    schema: AttributeSchema

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))
        index = {t.case_id: t for t in self.traces}
        if len(index) != len(self.traces):
            raise LogError("duplicate case ids in event log")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    def __getitem__(self, case_id: str) -> Trace:
        return self._index[case_id]

    def __contains__(self, case_id: str) -> bool:
        return case_id in self._index

    @property
    def case_ids(self) -> list[str]:
        return [t.case_id for t in self.traces]

    @property
    def n_events(self) -> int:
        return sum(len(t) for t in self.traces)

    def events(self) -> Iterable[Event]:
        for trace in self.traces:
            yield from trace.events

    def subset(self, case_ids: Iterable[str]) -> "EventLog":
        keep = set(case_ids)
        return EventLog(tuple(t for t in self.traces if t.case_id in keep), self.schema)

    def activities(self) -> list[str]:
        return sorted({e.activity for e in self.events()})


def _group(events: Iterable[Event]) -> dict[str, list[Event]]:
    groups: dict[str, list[Event]] = {}
    for ev in events:
        groups.setdefault(ev.case_id, []).append(ev)
    return groups


def infer_schema(events: list[Event]) -> AttributeSchema:
    """Classify every attribute as static/dynamic and numeric/categorical.

    An attribute is static iff it takes a single value (missing counts as a
    value) within every case, and numeric iff every non-missing value parses
    as a finite real.
    """
    if not events:
        raise LogError("cannot infer a schema from zero events")
    names = sorted({name for ev in events for name in ev.attrs})
    groups = _group(events)
    out = {}
    for name in names:
        numeric = all(parse_number(ev.attrs[name]) is not None for ev in events if name in ev.attrs)
        static = True
        for evs in groups.values():
            seen = {_norm(ev.attrs.get(name), numeric) for ev in evs}
            if len(seen) > 1:
                static = False
                break
        out[name] = AttributeSpec(
            AttributeKind.STATIC if static else AttributeKind.DYNAMIC,
            ValueType.NUMERIC if numeric else ValueType.CATEGORICAL,
        )
    return AttributeSchema(out)


def _norm(value, numeric: bool):
    if value is None:
        return None
    return parse_number(value) if numeric else str(value)


def _coerce(ev: Event, schema: AttributeSchema) -> Event:
    attrs = {}
    for name, value in ev.attrs.items():
        spec = schema.attributes.get(name)
        if spec is None:
            raise LogError(f"attribute {name!r} of case {ev.case_id!r} not declared in schema")
        if spec.value_type == ValueType.NUMERIC:
            num = parse_number(value)
            if num is None:
                raise LogError(
                    f"attribute {name!r} declared numeric but case {ev.case_id!r} has value {value!r}"
                )
            attrs[name] = num
        else:
            attrs[name] = str(value)
    return replace(ev, attrs=attrs)


def build_log(events: list[Event], schema: AttributeSchema | None = None) -> EventLog:
    """Group events into traces, sort them in time and hoist static attributes."""
    if not events:
        raise LogError("cannot build an event log from zero events")
    if schema is None:
        schema = infer_schema(events)
    coerced = [_coerce(ev, schema) for ev in events]
    static_names = schema.names(AttributeKind.STATIC)
    traces = []
    for case_id, evs in _group(coerced).items():
        # stable: ties keep input order
        evs = sorted(evs, key=lambda e: e.timestamp)
        statics = {}
        for name in static_names:
            values = {ev.attrs.get(name) for ev in evs}
            if len(values) > 1:
                raise LogError(f"static attribute {name!r} varies within case {case_id!r}")
            (value,) = values
            if value is not None:
                statics[name] = value
        traces.append(Trace(case_id, tuple(evs), statics))
    return EventLog(tuple(traces), schema)


# --- labelling -------------------------------------------------------------


@dataclass(frozen=True)
class ContainsActivity:
    activity: str

    def __post_init__(self):
        if not self.activity:
            raise ValueError("ContainsActivity needs a non-empty activity")

    @property
    def label_activities(self) -> tuple[str, ...]:
        return (self.activity,)

    @property
    def anchor(self) -> str:
        """Activity whose occurrence the outcome is about."""
        return self.activity

    def to_dict(self) -> dict:
        return {"type": "contains_activity", "activity": self.activity}


@dataclass(frozen=True)
class EventuallyFollows:
    a: str
    b: str

    def __post_init__(self):
        if not self.a or not self.b:
            raise ValueError("EventuallyFollows needs non-empty activities")

    @property
    def label_activities(self) -> tuple[str, ...]:
        return (self.a, self.b)

    @property
    def anchor(self) -> str:
        return self.b

    def to_dict(self) -> dict:
        return {"type": "eventually_follows", "a": self.a, "b": self.b}


LabelSpec = Union[ContainsActivity, EventuallyFollows]


def label_from_dict(data: Mapping) -> LabelSpec:
    kind = data.get("type")
    if kind == "contains_activity":
        return ContainsActivity(data["activity"])
    if kind == "eventually_follows":
        return EventuallyFollows(data["a"], data["b"])
    raise ValueError(f"unknown label type {kind!r}")


def evaluate_label(trace: Trace, spec: LabelSpec) -> bool:
    acts = trace.activities
    if isinstance(spec, ContainsActivity):
        return spec.activity in acts
    if isinstance(spec, EventuallyFollows):
        # every a must have a later b: equivalent to "no a after the last b"
        last_b = -1
        for j, act in enumerate(acts):
            if act == spec.b:
                last_b = j
        return all(j < last_b for j, act in enumerate(acts) if act == spec.a)
    raise TypeError(f"unsupported label spec {spec!r}")
