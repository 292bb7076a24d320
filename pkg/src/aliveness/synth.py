"""Synthetic communities with a planted departure rule.

Timeline of a generated corpus:

* ``[start, start + window_days)``: the base random graph is played out as
  events, so a snapshot over exactly this window reproduces it.
* Each member departs iff its planted attribute (measured on the base graph)
  is below ``rule_threshold``; with probability ``noise`` the fate is flipped.
  Departed members never interact again.
* From ``start + window_days`` until ``start + months``, every remaining
  member starts one interaction with another remaining member in each
  7-day slot, so any window of 14 days or more sees all of them.

Use ``t = start``, ``t1 = start + 2 months`` (see ``suggested_plan``).
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .features import ALL_FEATURES, EXOGENOUS_FEATURES
from .graph import Graph, all_metrics
from .ingest import (
    InteractionEvent, MemberAttributes, add_months, format_time, parse_time,
    write_attributes, write_events,
)


@dataclass(frozen=True)
class SyntheticSpec:
    n_nodes: int = 120
    density: float = 0.025
    rule_attribute: str = "degree"
    rule_threshold: float = 3.0
    noise: float = 0.0
    months: int = 30
    seed: int = 0
    start: str = "2010-01-01T00:00:00Z"
    window_days: int = 45

    def __post_init__(self):
        if self.n_nodes < 4:
            raise ValueError("n_nodes must be >= 4")
        if not 0.0 < self.density <= 1.0:
            raise ValueError("density must be in (0, 1]")
        if not 0.0 <= self.noise < 0.5:
            raise ValueError("noise must be in [0, 0.5)")
        if self.rule_attribute not in ALL_FEATURES:
            raise ValueError(f"unknown rule attribute {self.rule_attribute!r}")
        if self.window_days < 1:
            raise ValueError("window_days must be >= 1")
        parse_time(self.start)
        if self.months * 28 < self.window_days + 60:
            raise ValueError("months too short for a training window plus horizons")

    @property
    def start_time(self) -> datetime:
        return parse_time(self.start)


@dataclass
class SyntheticCorpus:
    spec: SyntheticSpec
    events: list[InteractionEvent]
    attrs: dict[str, MemberAttributes]
    departed: dict[str, bool]
    departure_time: dict[str, datetime | None]
    planted: dict[str, float]
    flipped: dict[str, bool]


def _member(i: int, width: int) -> str:
    return f"u{i:0{width}d}"


def generate(spec: SyntheticSpec) -> SyntheticCorpus:
    rng = np.random.default_rng(spec.seed)
    start = spec.start_time
    n = spec.n_nodes
    width = len(str(n - 1))
    ids = [_member(i, width) for i in range(n)]
    phase0 = spec.window_days * 86400

    # base graph
    iu, ju = np.triu_indices(n, k=1)
    mask = rng.random(len(iu)) < spec.density
    base_edges = [(ids[i], ids[j]) for i, j in zip(iu[mask].tolist(), ju[mask].tolist())]

    # exogenous attributes, independent of structure
    views = rng.geometric(1 / 60, size=n) - 1
    upvotes = rng.poisson(8, size=n)
    downvotes = rng.poisson(1.5, size=n)
    reputation = np.maximum(1, 1 + 10 * upvotes - 2 * downvotes)
    reg_offsets = rng.integers(0, 90 * 86400, size=n)

    if spec.rule_attribute in EXOGENOUS_FEATURES:
        table = {"views": views, "upvotes": upvotes, "downvotes": downvotes, "reputation": reputation}
        planted = {v: float(table[spec.rule_attribute][k]) for k, v in enumerate(ids)}
    else:
        # measured on the graph a snapshot of the first window would see
        met = all_metrics(Graph(base_edges))
        planted = {v: float(getattr(met[v], spec.rule_attribute)) if v in met else 0.0 for v in ids}
    flips = rng.random(n) < spec.noise
    flipped = {v: bool(f) for v, f in zip(ids, flips.tolist())}
    departed = {v: (planted[v] < spec.rule_threshold) != flipped[v] for v in ids}

    events = []
    last_seen: dict[str, datetime] = {}
    for a, b in base_edges:
        for _ in range(int(rng.integers(1, 4))):
            when = start + timedelta(seconds=int(rng.integers(0, phase0)))
            actor, target = (a, b) if rng.random() < 0.5 else (b, a)
            kind = "comment" if rng.random() < 0.7 else "answer"
            events.append(InteractionEvent(when, actor, target, kind))
            for v in (a, b):
                last_seen[v] = max(last_seen.get(v, when), when)

    stayers = [v for v in ids if not departed[v]]
    end = add_months(start, spec.months)
    slot = start + timedelta(seconds=phase0)
    week = 7 * 86400
    if len(stayers) >= 2:
        while slot + timedelta(seconds=week) <= end:
            for k, v in enumerate(stayers):
                other = stayers[(k + 1 + int(rng.integers(0, len(stayers) - 1))) % len(stayers)]
                when = slot + timedelta(seconds=int(rng.integers(0, week)))
                events.append(InteractionEvent(when, v, other, "comment" if rng.random() < 0.7 else "answer"))
            slot += timedelta(seconds=week)
    events.sort()

    attrs = {}
    departure_time = {}
    for k, v in enumerate(ids):
        reg = start - timedelta(seconds=int(reg_offsets[k]))
        if departed[v]:
            last = last_seen.get(v, reg)
            departure_time[v] = last
        else:
            last = end
            departure_time[v] = None
        attrs[v] = MemberAttributes(v, reg, last, int(upvotes[k]), int(downvotes[k]),
                                    int(views[k]), int(reputation[k]))
    return SyntheticCorpus(spec, events, attrs, departed, departure_time, planted, flipped)


def suggested_plan(spec: SyntheticSpec) -> dict:
    start = spec.start_time
    horizons = [h for h in (2, 4, 12, 24) if add_months(start, 2 + h) + timedelta(days=spec.window_days)
                <= add_months(start, spec.months)]
    return {
        "t": format_time(start),
        "t1": format_time(add_months(start, 2)),
        "delta": spec.window_days,
        "horizons": horizons,
    }


def write_corpus(corpus: SyntheticCorpus, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "events": out / "events.csv",
        "attributes": out / "attributes.csv",
        "departures": out / "departures.csv",
        "spec": out / "synth.json",
    }
    write_events(corpus.events, paths["events"])
    write_attributes(corpus.attrs.values(), paths["attributes"])
    with open(paths["departures"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("member_id", "departed", "departure_time", "planted_value", "flipped"))
        for v in corpus.attrs:
            t = corpus.departure_time[v]
            w.writerow((v, str(corpus.departed[v]).lower(), format_time(t) if t else "",
                        repr(corpus.planted[v]), str(corpus.flipped[v]).lower()))
    meta = {"spec": asdict(corpus.spec), "suggested_plan": suggested_plan(corpus.spec)}
    paths["spec"].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return paths
