"""Process knowledge from the event log: directly-follows graph and order statistics.

Ratios are taken over cases, and "before"/"after" are anchored at the first
occurrence of the reference activity.
"""
from __future__ import annotations

import operator
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from .eventlog import EventLog, parse_number


class MiningError(ValueError):
    pass


@dataclass(frozen=True)
class Frequency:
    case_frequency: int
    total_frequency: int


@dataclass
class ProcessGraph:
    n_cases: int
    nodes: dict[str, Frequency] = field(default_factory=dict)
    edges: dict[tuple[str, str], Frequency] = field(default_factory=dict)
    start_activities: dict[str, int] = field(default_factory=dict)
    end_activities: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_cases": self.n_cases,
            "nodes": {a: vars(f) for a, f in sorted(self.nodes.items())},
            "edges": [
                {"source": a, "target": b, **vars(f)} for (a, b), f in sorted(self.edges.items())
            ],
            "start_activities": dict(sorted(self.start_activities.items())),
            "end_activities": dict(sorted(self.end_activities.items())),
        }

    def to_dot(self) -> str:
        """Graphviz text; nodes are labelled with the activity and its case frequency."""

        def q(s: str) -> str:
            return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'

        lines = ["digraph dfg {", "  rankdir=LR;", "  node [shape=box];"]
        for act, f in sorted(self.nodes.items()):
            label = q(act + "\n" + str(f.case_frequency)).replace("\n", "\\n")
            lines.append(f"  {q(act)} [label={label}];")
        lines.append('  "__start__" [shape=circle, label=""];')
        lines.append('  "__end__" [shape=doublecircle, label=""];')
        for act, n in sorted(self.start_activities.items()):
            lines.append(f'  "__start__" -> {q(act)} [label="{n}"];')
        for (a, b), f in sorted(self.edges.items()):
            lines.append(f'  {q(a)} -> {q(b)} [label="{f.total_frequency}"];')
        for act, n in sorted(self.end_activities.items()):
            lines.append(f'  {q(act)} -> "__end__" [label="{n}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def discover_dfg(log: EventLog) -> ProcessGraph:
    if len(log) == 0:
        raise MiningError("cannot discover a graph from an empty log")
    node_total, node_cases = Counter(), Counter()
    edge_total, edge_cases = Counter(), Counter()
    starts, ends = Counter(), Counter()
    for trace in log:
        acts = trace.activities
        node_total.update(acts)
        node_cases.update(set(acts))
        pairs = list(zip(acts, acts[1:]))
        edge_total.update(pairs)
        edge_cases.update(set(pairs))
        starts[acts[0]] += 1
        ends[acts[-1]] += 1
    return ProcessGraph(
        n_cases=len(log),
        nodes={a: Frequency(node_cases[a], node_total[a]) for a in node_total},
        edges={e: Frequency(edge_cases[e], edge_total[e]) for e in edge_total},
        start_activities=dict(starts),
        end_activities=dict(ends),
    )


def min_prefix_index(log: EventLog, activity: str) -> int | None:
    """Smallest 1-based position at which ``activity`` occurs in any trace."""
    best = None
    for trace in log:
        acts = trace.activities
        if activity in acts:
            pos = acts.index(activity) + 1
            if best is None or pos < best:
                best = pos
    return best


def eventually_follows_ratio(log: EventLog, a: str, b: str) -> float:
    """Share of cases containing ``a`` where ``b`` occurs after the first ``a``."""
    hits = total = 0
    for trace in log:
        acts = trace.activities
        if a not in acts:
            continue
        total += 1
        if b in acts[acts.index(a) + 1 :]:
            hits += 1
    if total == 0:
        raise MiningError(f"activity {a!r} does not occur in the log")
    return hits / total


def precedes_ratio(log: EventLog, a: str, b: str) -> float:
    """Share of cases containing ``b`` where ``a`` occurs before the first ``b``."""
    hits = total = 0
    for trace in log:
        acts = trace.activities
        if b not in acts:
            continue
        total += 1
        if a in acts[: acts.index(b)]:
            hits += 1
    if total == 0:
        raise MiningError(f"activity {b!r} does not occur in the log")
    return hits / total


_OPS: dict[str, Callable[[float, float], bool]] = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}

#: per-event quantities derived from the trace rather than stored attributes
DERIVED_EVENT_VALUES = ("elapsed_time", "time_since_last_event")


def _event_matches(ev, trace, attr: str, value) -> bool:
    if attr == "activity":
        actual = ev.activity
    elif attr == "resource":
        actual = ev.resource_token
    elif attr in ev.attrs:
        actual = ev.attrs[attr]
    elif attr in trace.static_attrs:
        actual = trace.static_attrs[attr]
    else:
        return False
    if isinstance(actual, float):
        return parse_number(value) == actual
    return str(actual) == str(value)


def conditional_event_stat(
    log: EventLog,
    condition: tuple[str, object],
    numeric_attr: str,
    predicate: tuple[str, float],
) -> float:
    """Fraction of events matching ``attr == value`` whose ``numeric_attr`` satisfies ``predicate``.

    ``numeric_attr`` may name a stored numeric attribute or one of
    ``elapsed_time`` / ``time_since_last_event`` (seconds, computed per event).
    Events lacking the attribute count as not satisfying the predicate.
    """
    attr, value = condition
    op_name, threshold = predicate
    if op_name not in _OPS:
        raise MiningError(f"unknown comparison {op_name!r}")
    op = _OPS[op_name]
    matched = satisfied = 0
    for trace in log:
        times = trace.times
        for i, ev in enumerate(trace.events):
            if not _event_matches(ev, trace, attr, value):
                continue
            matched += 1
            if numeric_attr == "elapsed_time":
                x = float(times[i] - times[0])
            elif numeric_attr == "time_since_last_event":
                x = float(times[i] - times[i - 1]) if i else 0.0
            else:
                x = parse_number(ev.attrs.get(numeric_attr, trace.static_attrs.get(numeric_attr)))
                if x is None:
                    continue
            if op(x, float(threshold)):
                satisfied += 1
    if matched == 0:
        raise MiningError(f"no event matches {attr} = {value!r}")
    return satisfied / matched
