"""Synthetic event logs with known ground truth.

Each scenario builder returns plain events plus whatever the scenario
guarantees by construction (label rule, designated activities, expected
cardinalities), so tests can check the pipeline against known answers.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eventlog import ContainsActivity, Event, LabelSpec

T0 = 1_600_000_000.0
HOUR = 3600.0


def random_events(
    rng: np.random.Generator,
    n_traces: int = 10,
    max_len: int = 8,
    n_activities: int = 4,
    n_resources: int = 3,
    with_attrs: bool = True,
) -> list[Event]:
    """Small random log with every attribute flavour the encoders handle.

    Includes missing resources, missing dynamic values, timestamp ties,
    a static categorical (``segment``), a static numeric (``age``), a dynamic
    categorical (``channel``) and a dynamic numeric (``cost``).
    """
    acts = [f"A{i}" for i in range(n_activities)]
    ress = [f"r{i}" for i in range(n_resources)]
    events = []
    for c in range(n_traces):
        n = int(rng.integers(1, max_len + 1))
        t = T0 + float(rng.integers(0, 50)) * HOUR
        segment = str(rng.choice(["gold", "silver", "x|y=z"]))
        age = float(rng.integers(18, 80))
        for _ in range(n):
            t += float(rng.choice([0.0, 60.0, 3600.0, 7200.5]))
            attrs = {}
            if with_attrs:
                attrs["segment"] = segment
                attrs["age"] = age
                if rng.random() < 0.8:
                    attrs["channel"] = str(rng.choice(["web", "phone", "mail"]))
                if rng.random() < 0.7:
                    attrs["cost"] = float(np.round(rng.normal(100, 30), 2))
            res = str(rng.choice(ress)) if rng.random() < 0.85 else None
            events.append(Event(f"c{c}", str(rng.choice(acts)), t, res, attrs))
    return events


def _emit(events, case_id, acts, start, step=HOUR, resources=None, attrs=None):
    t = start
    for i, act in enumerate(acts):
        res = resources[i] if resources is not None else None
        events.append(Event(case_id, act, t, res, dict(attrs or {})))
        t += step
    return t


@dataclass
class Scenario:
    events: list[Event]
    label: LabelSpec | None = None
    info: dict = field(default_factory=dict)


def leakage_log(
    n_cases: int = 500,
    follow_ratio: float = 0.7,
    precede_ratio: float = 0.5,
    seed: int = 0,
    label_activity: str = "X",
    follower: str = "Y",
    predecessor: str = "Z",
) -> Scenario:
    """Outcome log labelled by the occurrence of ``label_activity``.

    Half of the cases contain the label activity. Among them, exactly
    ``round(follow_ratio * n)`` also execute ``follower`` afterwards and
    ``round(precede_ratio * n)`` execute ``predecessor`` before it. The other
    cases contain only noise activities, none of which is frequent enough to
    trip a 0.5 ratio. The label activity is executed by four resources and
    its companions by one, so no single label feature dominates them.
    """
    rng = np.random.default_rng(seed)
    noise = [f"N{i:02d}" for i in range(20)]
    n_pos = n_cases // 2
    pos_ids = set(rng.choice(n_cases, size=n_pos, replace=False).tolist())
    pos_order = sorted(pos_ids)
    n_follow = round(follow_ratio * n_pos)
    n_precede = round(precede_ratio * n_pos)
    with_follow = set(rng.choice(pos_order, size=n_follow, replace=False).tolist())
    with_precede = set(rng.choice(pos_order, size=n_precede, replace=False).tolist())
    events: list[Event] = []
    for c in range(n_cases):
        acts = [str(a) for a in rng.choice(noise, size=int(rng.integers(3, 7)))]
        if c in pos_ids:
            if c in with_precede:
                acts.append(predecessor)
            acts.append(label_activity)
            if c in with_follow:
                acts.append(follower)
            acts += [str(a) for a in rng.choice(noise, size=int(rng.integers(0, 3)))]
        # the label activity is spread over four resources, its companions use one
        resources = [
            f"r{int(rng.integers(0, 4))}" if a == label_activity else "r0" if a in (follower, predecessor)
            else f"r{int(rng.integers(0, 2))}"
            for a in acts
        ]
        _emit(events, f"case{c:04d}", acts, T0 + c * 6 * HOUR, resources=resources)
    return Scenario(
        events,
        ContainsActivity(label_activity),
        {"n_positive": n_pos, "follow_ratio": n_follow / n_pos, "precede_ratio": n_precede / n_pos,
         "label_activity": label_activity, "follower": follower, "predecessor": predecessor},
    )


LATE_ACTIVITIES = ("O_SENT_BACK", "W_Validate Request", "A_DECLINED", "O_DECLINED", "A_CANCELLED", "A_APPROVED")


def relevance_log(n_cases: int = 400, seed: int = 0, first_late_index: int = 14) -> Scenario:
    """Loan-style outcome log whose decisive activities only occur late.

    Positions before ``first_late_index`` hold routine activities; the six
    designated activities (and ``O_ACCEPTED``) appear from that position on.
    Every trace is at least 26 events long.
    """
    rng = np.random.default_rng(seed)
    early = [f"E{i:02d}" for i in range(8)]
    events: list[Event] = []
    for c in range(n_cases):
        acts = [str(a) for a in rng.choice(early, size=first_late_index - 1)]
        u = rng.random()
        if u < 0.45:
            tail = ["W_Validate Request", "O_SENT_BACK", "A_APPROVED", "O_ACCEPTED"]
        elif u < 0.75:
            tail = ["A_DECLINED", "O_DECLINED"]
        else:
            tail = ["A_CANCELLED"]
        acts += tail
        total = int(rng.integers(26, 36))
        acts += [str(a) for a in rng.choice(early, size=total - len(acts))]
        resources = [f"u{int(rng.integers(0, 2))}" for _ in acts]
        _emit(events, f"loan{c:04d}", acts, T0 + c * 4 * HOUR, step=600.0, resources=resources)
    return Scenario(
        events,
        ContainsActivity("O_ACCEPTED"),
        {"designated": list(LATE_ACTIVITIES), "first_late_index": first_late_index},
    )


def static_dominance_log(n_cases: int = 300, seed: int = 0, dynamic_signal: bool = False) -> Scenario:
    """Remaining-time log driven either by a static code or by the first activity.

    All events but the last share one timestamp, so for prefixes shorter than
    the trace the remaining time equals the gap before the final event. With
    ``dynamic_signal=False`` that gap is a function of ``Diagnosis_code``;
    otherwise it is a function of the first activity and the codes are noise.
    Use ``max_len <= 6``: every trace has at least 8 events.
    """
    rng = np.random.default_rng(seed)
    codes = ["DC822", "DC106", "DC439", "DC501", "DC611", "DC702"]
    code_hours = dict(zip(codes, [2.0, 30.0, 75.0, 140.0, 220.0, 400.0]))
    starts = ["S_intake", "S_referral", "S_emergency", "S_transfer"]
    start_hours = dict(zip(starts, [5.0, 60.0, 180.0, 350.0]))
    body = ["lab test", "consult", "scan", "ward visit", "billing"]
    events: list[Event] = []
    for c in range(n_cases):
        code = str(rng.choice(codes))
        treatment = f"T{codes.index(code) if not dynamic_signal else int(rng.integers(0, 6))}"
        first = str(rng.choice(starts))
        n = int(rng.integers(8, 13))
        acts = [first] + [str(a) for a in rng.choice(body, size=n - 2)] + ["discharge"]
        gap = (start_hours[first] if dynamic_signal else code_hours[code]) * HOUR
        t0 = T0 + c * 24 * HOUR
        attrs = {"Diagnosis_code": code, "Treatment_code": treatment}
        for i, act in enumerate(acts):
            t = t0 + gap if i == n - 1 else t0
            events.append(Event(f"p{c:04d}", act, t, f"dept{int(rng.integers(0, 3))}", attrs))
    return Scenario(events, None, {"codes": code_hours, "starts": start_hours})


def sparsity_log(
    n_cases: int = 250,
    seed: int = 0,
    n_activities: int = 180,
    n_orgs: int = 276,
    n_codes: int = 200,
    n_treatments: int = 150,
    n_numeric: int = 4,
) -> Scenario:
    """Log with high-cardinality categoricals, a hospital-log lookalike.

    Every category value is used at least once and each activity is always
    executed by the same resource, so the aggregation + static width is
    known in closed form (returned in ``info``).
    """
    rng = np.random.default_rng(seed)
    acts = [f"act{i:03d}" for i in range(n_activities)]
    owner = {a: f"res{i % 40:02d}" for i, a in enumerate(acts)}
    orgs = [f"org{i:03d}" for i in range(n_orgs)]
    codes = [f"D{i:03d}" for i in range(n_codes)]
    treats = [f"T{i:03d}" for i in range(n_treatments)]
    lengths = rng.integers(5, 15, size=n_cases)
    total = int(lengths.sum())
    if total < max(n_activities, n_orgs) or n_cases < max(n_codes, n_treatments):
        raise ValueError("not enough cases/events to use every category value")
    act_seq = rng.permutation(np.resize(np.arange(n_activities), total))
    org_seq = rng.permutation(np.resize(np.arange(n_orgs), total))
    code_seq = rng.permutation(np.resize(np.arange(n_codes), n_cases))
    treat_seq = rng.permutation(np.resize(np.arange(n_treatments), n_cases))
    events: list[Event] = []
    k = 0
    for c in range(n_cases):
        t = T0 + c * 12 * HOUR
        statics = {"Diagnosis_code": codes[code_seq[c]], "Treatment_code": treats[treat_seq[c]],
                   "age": float(rng.integers(18, 90))}
        for _ in range(int(lengths[c])):
            a = acts[act_seq[k]]
            attrs = dict(statics)
            attrs["org_group"] = orgs[org_seq[k]]
            for j in range(n_numeric):
                attrs[f"num{j}"] = float(np.round(rng.normal(10 * (j + 1), 3), 3))
            events.append(Event(f"h{c:04d}", a, t, owner[a], attrs))
            t += float(rng.integers(1, 48)) * HOUR
            k += 1
    info = {
        "n_pairs": n_activities,
        "dynamic_categorical": {"org_group": n_orgs},
        "dynamic_numeric": n_numeric,
        "static_categorical": {"Diagnosis_code": n_codes, "Treatment_code": n_treatments},
        "static_numeric": 1,
        # case id, activity, timestamp, resource, org_group, numerics, three case attributes
        "raw_attributes": 5 + n_numeric + 3,
    }
    info["expected_width"] = (
        n_activities + n_orgs + 4 * n_numeric + n_codes + n_treatments + 1
    )
    return Scenario(events, None, info)
