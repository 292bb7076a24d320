"""Per-node feature matrices, Pearson correlations, active-weeks CDF and feature-subset variants."""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import DEFAULT_SAMPLE_THRESHOLD, METRIC_FIELDS, all_metrics
from .ingest import LeaveLabeling, MemberAttributes, Snapshot

log = logging.getLogger(__name__)

NETWORK_FEATURES = tuple(sorted(METRIC_FIELDS))
EXOGENOUS_FEATURES = ("downvotes", "reputation", "upvotes", "views")
ALL_FEATURES = NETWORK_FEATURES + EXOGENOUS_FEATURES
VARIANTS = ("All", "Best4", "Best1", "Best2")


@dataclass(frozen=True)
class FeatureRow:
    node_id: str
    network: dict[str, float]
    exogenous: dict[str, float]
    leave_label: bool


@dataclass
class FeatureMatrix:
    """Rows are nodes, columns are features in a fixed documented order.

    The order is network features alphabetically, then exogenous attributes
    alphabetically (see ``ALL_FEATURES``); subsets keep that relative order.
    """

    node_ids: list[str]
    columns: list[str]
    values: np.ndarray
    labels: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.node_ids), len(self.columns))
        self.labels = np.asarray(self.labels, dtype=bool)
        if len(self.labels) != len(self.node_ids):
            raise ValueError("one label per row required")
        if np.isnan(self.values).any():
            raise ValueError("feature matrix contains missing values")

    def __len__(self) -> int:
        return len(self.node_ids)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise KeyError(f"no feature column {name!r}") from None

    def take(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        return FeatureMatrix([self.node_ids[i] for i in idx], list(self.columns),
                             self.values[idx], self.labels[idx], dict(self.provenance))

    def with_columns(self, cols: Sequence[str]) -> "FeatureMatrix":
        idx = [self.columns.index(c) for c in cols]
        return FeatureMatrix(list(self.node_ids), list(cols), self.values[:, idx],
                             self.labels.copy(), dict(self.provenance))

    @property
    def rows(self) -> list[FeatureRow]:
        out = []
        for i, v in enumerate(self.node_ids):
            vals = dict(zip(self.columns, self.values[i].tolist()))
            out.append(FeatureRow(
                v,
                {c: x for c, x in vals.items() if c in NETWORK_FEATURES},
                {c: x for c, x in vals.items() if c not in NETWORK_FEATURES},
                bool(self.labels[i]),
            ))
        return out


def assemble(
    snap_t: Snapshot,
    labeling: LeaveLabeling,
    attrs: Mapping[str, MemberAttributes],
    sample_size: int | None = None,
    sample_threshold: int = DEFAULT_SAMPLE_THRESHOLD,
    seed: int = 0,
) -> FeatureMatrix:
    """One row per initial node: Table-1 measures, exogenous attributes, leave label.

    Members absent from ``attrs`` get all exogenous features 0.
    """
    if labeling.initial_nodes != snap_t.nodes:
        raise ValueError("labeling does not belong to this snapshot")
    metrics = all_metrics(snap_t.graph, sample_size, sample_threshold, seed)
    node_ids = snap_t.graph.sorted_nodes()
    rows = []
    missing = 0
    for v in node_ids:
        if v not in metrics:
            raise RuntimeError(f"metric bundle lacks node {v!r}")
        m = metrics[v]
        net = [float(getattr(m, f)) for f in NETWORK_FEATURES]
        a = attrs.get(v)
        if a is None:
            missing += 1
            exo = [0.0] * len(EXOGENOUS_FEATURES)
        else:
            exo = [float(getattr(a, f)) for f in EXOGENOUS_FEATURES]
        rows.append(net + exo)
    if missing:
        log.warning("%d of %d members have no attribute record; exogenous features set to 0",
                    missing, len(node_ids))
    labels = [v in labeling.departed for v in node_ids]
    provenance = {
        "snapshot": snap_t.label,
        "labels_from": labeling.horizon_tag,
        "missing_attributes": missing,
    }
    if sample_size is not None and len(node_ids) > sample_threshold:
        provenance["avg_min_cut_sample_size"] = sample_size
    return FeatureMatrix([str(v) for v in node_ids], list(ALL_FEATURES),
                         np.array(rows, dtype=float).reshape(len(rows), len(ALL_FEATURES)),
                         np.array(labels, dtype=bool), provenance)


def save_matrix(m: FeatureMatrix, path: str | Path) -> None:
    """CSV with ``node_id``, feature columns, ``leave_label``; provenance in ``<path>.json``."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", *m.columns, "leave_label"])
        for v, row, lab in zip(m.node_ids, m.values.tolist(), m.labels.tolist()):
            w.writerow([v, *map(repr, row), "true" if lab else "false"])
    path.with_name(path.name + ".json").write_text(json.dumps(m.provenance, indent=2, sort_keys=True) + "\n")


def load_matrix(path: str | Path) -> FeatureMatrix:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "node_id" or header[-1] != "leave_label":
            raise ValueError(f"{path}: not a feature matrix file")
        columns = header[1:-1]
        node_ids, values, labels = [], [], []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: line {reader.line_num}: wrong field count")
            node_ids.append(row[0])
            values.append([float(x) for x in row[1:-1]])
            if row[-1] not in ("true", "false"):
                raise ValueError(f"{path}: line {reader.line_num}: leave_label must be true/false")
            labels.append(row[-1] == "true")
    if not node_ids:
        raise ValueError(f"{path}: feature matrix has no rows")
    meta = path.with_name(path.name + ".json")
    provenance = json.loads(meta.read_text()) if meta.exists() else {}
    return FeatureMatrix(node_ids, columns, np.array(values, dtype=float).reshape(len(node_ids), len(columns)),
                         np.array(labels, dtype=bool), provenance)


# --------------------------------------------------------------------------
# Analysis
# --------------------------------------------------------------------------

@dataclass
class Correlation:
    columns: list[str]
    matrix: np.ndarray
    constant: list[str]


def pearson_matrix(m: FeatureMatrix) -> Correlation:
    """Pearson correlation of every feature pair.

    Zero-variance features get correlation 0 everywhere (diagonal included)
    and are listed in ``constant``.
    """
    if len(m) < 2:
        raise ValueError("need at least two rows")
    x = m.values - m.values.mean(axis=0)
    ss = np.sqrt((x * x).sum(axis=0))
    constant = ss == 0
    if constant.any():
        log.warning("zero-variance features: %s", ", ".join(np.array(m.columns)[constant]))
    denom = np.outer(ss, ss)
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = (x.T @ x) / denom
    rho[constant, :] = 0.0
    rho[:, constant] = 0.0
    rho = np.clip((rho + rho.T) / 2, -1.0, 1.0)
    idx = np.flatnonzero(~constant)
    rho[idx, idx] = 1.0
    return Correlation(list(m.columns), rho, [c for c, k in zip(m.columns, constant) if k])


def write_correlation_csv(corr: Correlation, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", *corr.columns])
        for name, row in zip(corr.columns, corr.matrix.tolist()):
            w.writerow([name, *map(repr, row)])


def active_weeks_cdf(
    attrs: Mapping[str, MemberAttributes] | Iterable[MemberAttributes],
    members: Iterable[str] | None = None,
) -> list[tuple[int, float]]:
    """Empirical CDF of whole weeks between registration and last login."""
    records = list(attrs.values()) if isinstance(attrs, Mapping) else list(attrs)
    if members is not None:
        keep = set(members)
        records = [a for a in records if a.member_id in keep]
    if not records:
        raise ValueError("no members to build the active-weeks CDF from")
    weeks = []
    for a in records:
        span = a.last_login_date - a.registration_date
        if span.total_seconds() < 0:
            raise ValueError(f"member {a.member_id}: negative active span")
        weeks.append(span.days // 7)
    counts = Counter(weeks)
    n = len(weeks)
    out = []
    running = 0
    for w in sorted(counts):
        running += counts[w]
        out.append((w, running / n))
    return out


# --------------------------------------------------------------------------
# Variants
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VariantSpec:
    kind: str
    ranking: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in VARIANTS:
            raise ValueError(f"unknown variant {self.kind!r}; expected one of {VARIANTS}")


def variant_columns(columns: Sequence[str], spec: VariantSpec) -> list[str]:
    if spec.kind == "All":
        return list(columns)
    missing = [c for c in columns if c not in spec.ranking]
    if missing:
        raise ValueError(f"ranking does not cover columns {missing}")
    ranked = [c for c in spec.ranking if c in columns]
    if spec.kind == "Best4":
        chosen = set(ranked[:4])
    else:
        per_side = 1 if spec.kind == "Best1" else 2
        net = [c for c in ranked if c in NETWORK_FEATURES][:per_side]
        exo = [c for c in ranked if c not in NETWORK_FEATURES][:per_side]
        chosen = set(net + exo)
    return [c for c in columns if c in chosen]


def select_variant(m: FeatureMatrix, spec: VariantSpec) -> FeatureMatrix:
    """Keep the variant's columns; labels and row order are unchanged."""
    return m.with_columns(variant_columns(m.columns, spec))
