"""CSV event-log ingestion."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

from .eventlog import Event, LogError, to_utc


class IngestError(ValueError):
    """A CSV log could not be read; message names the file, row and column."""


@dataclass(frozen=True)
class ColumnMapping:
    case_column: str = "case_id"
    activity_column: str = "activity"
    timestamp_column: str = "timestamp"
    resource_column: str | None = None
    attribute_columns: tuple[str, ...] = field(default_factory=tuple)
    #: strptime format; None means ISO-8601 with optional fractional seconds
    timestamp_format: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "attribute_columns", tuple(self.attribute_columns))
        mandatory = [self.case_column, self.activity_column, self.timestamp_column]
        if len(set(mandatory)) != 3:
            raise ValueError(f"case, activity and timestamp columns must be distinct: {mandatory}")

    @classmethod
    def from_dict(cls, data: Mapping) -> "ColumnMapping":
        known = {
            "case_column",
            "activity_column",
            "timestamp_column",
            "resource_column",
            "attribute_columns",
            "timestamp_format",
        }
        return cls(**{k: v for k, v in data.items() if k in known})

    def to_dict(self) -> dict:
        return {
            "case_column": self.case_column,
            "activity_column": self.activity_column,
            "timestamp_column": self.timestamp_column,
            "resource_column": self.resource_column,
            "attribute_columns": list(self.attribute_columns),
            "timestamp_format": self.timestamp_format,
        }


def _parse_timestamp(raw: str, fmt: str | None) -> datetime:
    if fmt is None:
        return to_utc(raw)
    ts = datetime.strptime(raw.strip(), fmt)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return to_utc(ts)


def parse_csv(path: str | Path, mapping: ColumnMapping) -> list[Event]:
    """Read one event per data row of a comma-separated, UTF-8 file.

    Unmapped columns are ignored and empty cells become missing values.
    Malformed rows are fatal; nothing is skipped silently.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file, header row expected") from None
        col = {name: i for i, name in enumerate(header)}
        required = [mapping.case_column, mapping.activity_column, mapping.timestamp_column]
        optional = ([mapping.resource_column] if mapping.resource_column else []) + list(
            mapping.attribute_columns
        )
        for name in required + optional:
            if name not in col:
                raise IngestError(f"{path}: missing column {name!r}")

        events = []
        # row numbers are 1-based file lines, header is line 1
        for rowno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestError(
                    f"{path}: row {rowno} has {len(row)} fields, header has {len(header)}"
                )
            raw_ts = row[col[mapping.timestamp_column]]
            try:
                ts = _parse_timestamp(raw_ts, mapping.timestamp_format)
            except (ValueError, LogError) as exc:
                raise IngestError(
                    f"{path}: row {rowno}, column {mapping.timestamp_column!r}: "
                    f"unparseable timestamp {raw_ts!r}"
                ) from exc
            resource = row[col[mapping.resource_column]] if mapping.resource_column else None
            attrs = {name: row[col[name]] for name in mapping.attribute_columns if row[col[name]] != ""}
            try:
                events.append(
                    Event(
                        case_id=row[col[mapping.case_column]],
                        activity=row[col[mapping.activity_column]],
                        timestamp=ts,
                        resource=resource or None,
                        attrs=attrs,
                    )
                )
            except LogError as exc:
                raise IngestError(f"{path}: row {rowno}: {exc}") from exc
    return events


def format_timestamp(ts: datetime, fmt: str | None = None) -> str:
    if fmt is None:
        return ts.astimezone(timezone.utc).isoformat(timespec="milliseconds")
    return ts.strftime(fmt)


def write_csv(events: Iterable[Event], path: str | Path, mapping: ColumnMapping) -> None:
    """Write events in the layout ``parse_csv`` reads with the same mapping."""
    header = [mapping.case_column, mapping.activity_column, mapping.timestamp_column]
    if mapping.resource_column:
        header.append(mapping.resource_column)
    header.extend(mapping.attribute_columns)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for ev in events:
            row = [ev.case_id, ev.activity, format_timestamp(ev.timestamp, mapping.timestamp_format)]
            if mapping.resource_column:
                row.append(ev.resource or "")
            for name in mapping.attribute_columns:
                value = ev.attrs.get(name, "")
                row.append(repr(value) if isinstance(value, float) else value)
            writer.writerow(row)
