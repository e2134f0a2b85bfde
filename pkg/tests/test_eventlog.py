from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import eventually_follows_label
from ppminspect import synth
from ppminspect.eventlog import (
    MISSING_RESOURCE,
    AttributeKind,
    AttributeSchema,
    AttributeSpec,
    ContainsActivity,
    Event,
    EventuallyFollows,
    LogError,
    Trace,
    ValueType,
    build_log,
    evaluate_label,
    infer_schema,
    label_from_dict,
    to_utc,
)

T0 = 1_600_000_000.0


def ev(case, act, t, res=None, **attrs):
    return Event(case, act, T0 + t, res, attrs)


def trace_of(acts):
    return Trace("c", tuple(ev("c", a, i) for i, a in enumerate(acts)))


# --- build_log ---------------------------------------------------------------


def test_groups_events_by_case():
    log = build_log([ev("a", "A", 0), ev("b", "A", 1), ev("a", "B", 2)])
    assert len(log) == 2
    assert sorted(len(t) for t in log) == [1, 2]
    assert log["a"].activities == ["A", "B"]


def test_sorts_events_in_time():
    log = build_log([ev("a", "C", 30), ev("a", "B", 20), ev("a", "A", 10)])
    assert log["a"].activities == ["A", "B", "C"]
    assert np.all(np.diff(log["a"].times) >= 0)


def test_timestamp_ties_keep_input_order():
    log = build_log([ev("a", "X", 5), ev("a", "Y", 5), ev("a", "W", 0), ev("a", "Z", 5)])
    assert log["a"].activities == ["W", "X", "Y", "Z"]


def test_empty_input_is_an_error():
    with pytest.raises(LogError):
        build_log([])


def test_numeric_declared_attribute_rejects_text():
    schema = AttributeSchema({"amount": AttributeSpec(AttributeKind.DYNAMIC, ValueType.NUMERIC)})
    with pytest.raises(LogError, match="amount"):
        build_log([ev("a", "A", 0, amount="12"), ev("a", "B", 1, amount="lots")], schema)


def test_numeric_values_are_coerced_to_float():
    log = build_log([ev("a", "A", 0, amount="12.5"), ev("a", "B", 1, amount="3")])
    assert [e.attrs["amount"] for e in log["a"].events] == [12.5, 3.0]


def test_static_attributes_are_hoisted_and_kept_on_events():
    log = build_log([ev("a", "A", 0, segment="gold"), ev("a", "B", 1, segment="gold"), ev("b", "A", 0, segment="x")])
    assert log["a"].static_attrs == {"segment": "gold"}
    assert all(e.attrs["segment"] == "gold" for e in log["a"].events)


def test_missing_resource_has_distinct_token():
    e = ev("a", "A", 0)
    assert e.resource_token == MISSING_RESOURCE
    assert ev("a", "A", 0, "r1").resource_token == "r1"


def test_event_validation():
    with pytest.raises(LogError):
        Event("", "A", T0)
    with pytest.raises(LogError):
        Event("c", "", T0)
    with pytest.raises(LogError):
        Event("c", "A", float("inf"))
    with pytest.raises(LogError):
        Event("c", "A", "yesterday")


def test_timestamps_are_utc_with_millisecond_precision():
    ts = to_utc(datetime(2020, 1, 1, 12, 0, 0, 123456, tzinfo=timezone(timedelta(hours=2))))
    assert ts == datetime(2020, 1, 1, 10, 0, 0, 123000, tzinfo=timezone.utc)
    assert to_utc("2020-01-01T10:00:00.5Z") == datetime(2020, 1, 1, 10, 0, 0, 500000, tzinfo=timezone.utc)
    assert to_utc(0.0001).microsecond == 0


def test_rebuild_from_own_events_is_idempotent():
    rng = np.random.default_rng(3)
    log = build_log(synth.random_events(rng, n_traces=10))
    again = build_log(list(log.events()))
    assert again.schema == log.schema
    assert [t.events for t in again] == [t.events for t in log]
    assert [t.static_attrs for t in again] == [t.static_attrs for t in log]


# --- schema ------------------------------------------------------------------


def test_constant_per_case_attribute_is_static():
    schema = infer_schema([ev("a", "A", 0, seg="x"), ev("a", "B", 1, seg="x"), ev("b", "A", 0, seg="y")])
    assert schema["seg"] == AttributeSpec(AttributeKind.STATIC, ValueType.CATEGORICAL)


def test_varying_attribute_is_dynamic():
    schema = infer_schema([ev("a", "A", 0, seg="x"), ev("a", "B", 1, seg="y")])
    assert schema["seg"].kind == AttributeKind.DYNAMIC


def test_mixed_numeric_text_values_are_categorical():
    events = [ev("a", "A", 0, v="1.5"), ev("a", "B", 1, v="2"), ev("a", "C", 2, v="x")]
    assert infer_schema(events)["v"].value_type == ValueType.CATEGORICAL
    assert infer_schema(events[:2])["v"].value_type == ValueType.NUMERIC


def test_partially_missing_attribute_is_dynamic():
    schema = infer_schema([ev("a", "A", 0, v="1"), ev("a", "B", 1)])
    assert schema["v"].kind == AttributeKind.DYNAMIC


def test_schema_round_trips_through_dict():
    schema = infer_schema(synth.random_events(np.random.default_rng(0)))
    assert AttributeSchema.from_dict(schema.to_dict()) == schema


@given(st.integers(0, 10_000))
def test_static_attributes_take_one_value_per_trace(seed):
    log = build_log(synth.random_events(np.random.default_rng(seed), n_traces=6))
    for name in log.schema.names(AttributeKind.STATIC):
        for trace in log:
            assert len({e.attrs.get(name) for e in trace.events}) <= 1


# --- labels ------------------------------------------------------------------


def test_eventually_follows_examples():
    assert evaluate_label(trace_of("AB"), EventuallyFollows("A", "B"))
    assert not evaluate_label(trace_of("ABA"), EventuallyFollows("A", "B"))
    assert evaluate_label(trace_of("CC"), EventuallyFollows("A", "B"))


def test_contains_activity_examples():
    assert not evaluate_label(Trace("c", (ev("c", "A", 0), ev("c", "C", 1))), ContainsActivity("O_ACCEPTED"))
    assert evaluate_label(Trace("c", (ev("c", "O_ACCEPTED", 0),)), ContainsActivity("O_ACCEPTED"))


def test_eventually_follows_matches_double_loop_on_random_traces():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        acts = list(rng.choice(list("ABC"), size=int(rng.integers(1, 21))))
        assert evaluate_label(trace_of(acts), EventuallyFollows("A", "B")) == eventually_follows_label(acts, "A", "B")


def test_label_specs_round_trip_and_validate():
    for spec in (ContainsActivity("X"), EventuallyFollows("01_HOOFD_020", "08_AWB45_020_1")):
        assert label_from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError):
        ContainsActivity("")
    with pytest.raises(ValueError):
        EventuallyFollows("A", "")
    with pytest.raises(ValueError):
        label_from_dict({"type": "nope"})


def test_label_anchor_and_defining_activities():
    spec = EventuallyFollows("01_HOOFD_020", "08_AWB45_020_1")
    assert spec.anchor == "08_AWB45_020_1"
    assert spec.label_activities == ("01_HOOFD_020", "08_AWB45_020_1")
    assert ContainsActivity("X").anchor == "X"
