"""Event logs, member attributes, windowed snapshots and leave labels."""

from __future__ import annotations

import calendar
import csv
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable

from .graph import Graph, read_edge_list, write_edge_list

log = logging.getLogger(__name__)

EVENT_KINDS = ("comment", "answer", "other")
EVENT_HEADER = ("timestamp", "actor", "target", "kind")
ATTRIBUTE_HEADER = (
    "member_id", "registration_date", "last_login_date",
    "upvotes", "downvotes", "views", "reputation",
)
DEFAULT_WINDOW_DAYS = 45


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def parse_time(text: str) -> datetime:
    """Parse an ISO-8601 timestamp into an aware UTC datetime (second resolution).

    Naive timestamps are taken to be UTC; a trailing ``Z`` is accepted.
    """
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def format_time(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def add_months(dt: datetime, months: int) -> datetime:
    """Calendar month offset, clamping the day to the target month's length."""
    idx = dt.month - 1 + months
    year, month = dt.year + idx // 12, idx % 12 + 1
    day = min(dt.day, calendar.monthrange(year, month)[1])
    return dt.replace(year=year, month=month, day=day)


@dataclass(frozen=True, order=True)
class InteractionEvent:
    timestamp: datetime
    actor: str
    target: str
    kind: str = "other"


@dataclass
class ParseStats:
    rows: int = 0
    self_loops: int = 0
    unknown_kinds: int = 0


def parse_events(path: str | Path, stats: ParseStats | None = None) -> list[InteractionEvent]:
    """Read an events CSV (``timestamp,actor,target,kind``), sorted by time.

    Rows with ``actor == target`` are dropped and counted in ``stats``.
    Unrecognised kinds are kept as ``other``.
    """
    stats = stats if stats is not None else ParseStats()
    events = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read events file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        header = [h.strip() for h in header]
        if header[:4] != list(EVENT_HEADER):
            raise DataError(f"{path}: expected header {','.join(EVENT_HEADER)}, got {','.join(header)}")
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 4:
                raise DataError(f"{path}: line {lineno}: expected 4 fields, got {len(row)}")
            stats.rows += 1
            ts, actor, target, kind = (c.strip() for c in row[:4])
            try:
                when = parse_time(ts)
            except ValueError:
                raise DataError(f"{path}: line {lineno}: unparseable timestamp {ts!r}") from None
            if not actor or not target or any(c.isspace() for c in actor + target):
                raise DataError(f"{path}: line {lineno}: member ids must be non-empty tokens")
            if actor == target:
                stats.self_loops += 1
                continue
            kind = kind.lower()
            if kind not in EVENT_KINDS:
                stats.unknown_kinds += 1
                kind = "other"
            events.append(InteractionEvent(when, actor, target, kind))
    if stats.self_loops:
        log.warning("%s: dropped %d self-interaction rows", path, stats.self_loops)
    events.sort()
    return events


def write_events(events: Iterable[InteractionEvent], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_HEADER)
        for e in events:
            w.writerow((format_time(e.timestamp), e.actor, e.target, e.kind))


# --------------------------------------------------------------------------
# Member attributes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MemberAttributes:
    member_id: str
    registration_date: datetime
    last_login_date: datetime
    upvotes: int = 0
    downvotes: int = 0
    views: int = 0
    reputation: int = 0

    def __post_init__(self):
        if self.last_login_date < self.registration_date:
            raise DataError(f"member {self.member_id}: last login precedes registration")
        for name in ("upvotes", "downvotes", "views"):
            if getattr(self, name) < 0:
                raise DataError(f"member {self.member_id}: negative {name}")


def parse_attributes(path: str | Path) -> dict[str, MemberAttributes]:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read attributes file {path}: {exc}") from exc
    out = {}
    with fh:
        reader = csv.DictReader(fh)
        missing = set(ATTRIBUTE_HEADER) - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            lineno = reader.line_num
            try:
                attrs = MemberAttributes(
                    member_id=row["member_id"].strip(),
                    registration_date=parse_time(row["registration_date"]),
                    last_login_date=parse_time(row["last_login_date"]),
                    upvotes=int(row["upvotes"]),
                    downvotes=int(row["downvotes"]),
                    views=int(row["views"]),
                    reputation=int(row["reputation"]),
                )
            except DataError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
            out[attrs.member_id] = attrs
    return out


def write_attributes(attrs: Iterable[MemberAttributes], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ATTRIBUTE_HEADER)
        for a in attrs:
            w.writerow((a.member_id, format_time(a.registration_date), format_time(a.last_login_date),
                        a.upvotes, a.downvotes, a.views, a.reputation))


# --------------------------------------------------------------------------
# Snapshots
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Snapshot:
    graph: Graph
    window_start: datetime
    window_days: int
    label: str = ""
    n_events: int = 0

    @property
    def window_end(self) -> datetime:
        return self.window_start + timedelta(days=self.window_days)

    @property
    def nodes(self) -> frozenset:
        return self.graph.nodes


def build_snapshot(
    events: Iterable[InteractionEvent],
    window_start: datetime,
    window_days: int = DEFAULT_WINDOW_DAYS,
    label: str = "",
    kinds: Iterable[str] | None = None,
) -> Snapshot:
    """Graph of distinct member pairs interacting at least once in ``[start, start + days)``."""
    if window_days < 1:
        raise ValueError("window_days must be >= 1")
    end = window_start + timedelta(days=window_days)
    keep = set(kinds) if kinds is not None else None
    edges = []
    for e in events:
        if window_start <= e.timestamp < end and e.actor != e.target:
            if keep is None or e.kind in keep:
                edges.append((e.actor, e.target))
    return Snapshot(Graph(edges), window_start, window_days, label, n_events=len(edges))


def save_snapshot(snap: Snapshot, path: str | Path) -> None:
    """Write ``<path>`` as an edge list plus a ``<path>.json`` sidecar."""
    path = Path(path)
    write_edge_list(snap.graph, path)
    meta = {
        "window_start": format_time(snap.window_start),
        "window_days": snap.window_days,
        "label": snap.label,
        "n_events": snap.n_events,
    }
    path.with_name(path.name + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_snapshot(path: str | Path) -> Snapshot:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    return Snapshot(
        read_edge_list(path),
        parse_time(meta["window_start"]),
        int(meta["window_days"]),
        meta.get("label", ""),
        int(meta.get("n_events", 0)),
    )


# --------------------------------------------------------------------------
# Labels
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LeaveLabeling:
    initial_nodes: frozenset
    departed: frozenset
    ignored: frozenset = field(default_factory=frozenset)
    horizon_tag: str = ""


def label_leaves(snap_t: Snapshot, snap_future: Snapshot) -> LeaveLabeling:
    """Initial nodes of ``snap_t`` that no longer appear in ``snap_future``."""
    if snap_future.window_start <= snap_t.window_start:
        raise ValueError("future snapshot must start after the initial snapshot")
    initial = snap_t.nodes
    future = snap_future.nodes
    return LeaveLabeling(
        initial_nodes=initial,
        departed=initial - future,
        ignored=future - initial,
        horizon_tag=snap_future.label,
    )


@dataclass(frozen=True)
class NodeConfusion:
    """Node-set confusion: there are no true negatives in this view."""

    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        d = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / d if d else 0.0


def node_prediction_confusion(observed: set, predicted: set, initial: set) -> NodeConfusion:
    observed, predicted, initial = set(observed), set(predicted), set(initial)
    if not predicted <= initial:
        raise ValueError(f"predicted nodes outside the initial set: {sorted(map(str, predicted - initial))}")
    if not observed <= initial:
        raise ValueError(f"observed nodes outside the initial set: {sorted(map(str, observed - initial))}")
    return NodeConfusion(
        tp=len(observed & predicted),
        fp=len(predicted - observed),
        fn=len(observed - predicted),
    )
