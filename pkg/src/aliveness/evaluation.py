"""Cross-validation and the horizon / cross-community experiment protocols.

Protocol: snapshots ``G_t`` and ``G_t1`` (both ``window_days`` long) give the
training matrix, features from ``G_t`` and labels ``V_t - V_t1``. Each
horizon ``h`` (months after ``t1``) gives a test snapshot ``G_t'``; the same
initial nodes are scored against labels ``V_t - V_t'``. Nodes that first
appear after ``t`` never enter either matrix.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import classifier, stm
from .features import (
    VARIANTS, FeatureMatrix, VariantSpec, assemble, variant_columns,
)
from .graph import DEFAULT_SAMPLE_THRESHOLD
from .ingest import (
    DEFAULT_WINDOW_DAYS, InteractionEvent, MemberAttributes, Snapshot, add_months,
    build_snapshot, format_time, label_leaves,
)
from .metrics import Confusion, Scores, metrics

log = logging.getLogger(__name__)

REPORT_FIELDS = (
    "train_window", "horizon_months", "variant", "method", "empty",
    "tp", "fp", "fn", "tn", "precision", "recall", "accuracy", "f1",
)
BINARY_FEATURES = ("is_articulation",)


@dataclass(frozen=True)
class EvalReport:
    confusion: Confusion
    scores: Scores | None
    context: dict = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return self.scores is None

    def row(self) -> dict:
        c = self.confusion
        out = {k: self.context.get(k, "") for k in ("train_window", "horizon_months", "variant", "method")}
        out.update(empty="true" if self.empty else "false", tp=c.tp, fp=c.fp, fn=c.fn, tn=c.tn)
        for k in ("precision", "recall", "accuracy", "f1"):
            out[k] = "" if self.scores is None else repr(getattr(self.scores, k))
        return out


def evaluate_predictions(actual, predicted, context: dict | None = None) -> EvalReport:
    c = Confusion.from_predictions(actual, predicted)
    return EvalReport(c, metrics(c), dict(context or {}))


def write_report_csv(reports: Sequence[EvalReport], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.row())
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def write_report_json(reports: Sequence[EvalReport], path: str | Path) -> None:
    rows = []
    for r in reports:
        d = {k: r.context.get(k) for k in ("train_window", "horizon_months", "variant", "method")}
        d.update(vars(r.confusion))
        d["empty"] = r.empty
        if r.scores is not None:
            d.update(precision=r.scores.precision, recall=r.scores.recall,
                     accuracy=r.scores.accuracy, f1=r.scores.f1, degenerate=list(r.scores.degenerate))
        rows.append(d)
    Path(path).write_text(json.dumps(rows, indent=2) + "\n")


# --------------------------------------------------------------------------
# Fitting a method (STM on one attribute, or a classifier on a variant)
# --------------------------------------------------------------------------

def parse_method(method: str) -> tuple[str, str | None]:
    """``stm:<attribute>`` or a classifier name; returns ``(kind, attribute)``."""
    if method.startswith("stm:"):
        attr = method[4:]
        if not attr:
            raise ValueError("stm method needs an attribute, e.g. stm:degree")
        return "stm", attr
    kind = classifier.ALIASES.get(method, method)
    if kind not in classifier.KINDS:
        raise ValueError(f"unknown method {method!r}; use stm:<attribute>, logreg, svm or forest")
    return kind, None


@dataclass
class FittedMethod:
    method: str
    variant: str
    columns: list[str]
    ranking: list[str] = field(default_factory=list)
    stm_model: stm.StmModel | None = None
    model: classifier.TrainedModel | None = None
    provenance: dict = field(default_factory=dict)

    def predict(self, m: FeatureMatrix) -> np.ndarray:
        if self.stm_model is not None:
            return stm.predict(self.stm_model, m.column(self.stm_model.attribute))
        missing = [c for c in self.columns if c not in m.columns]
        if missing:
            raise classifier.ModelError(f"test matrix lacks columns {missing}")
        sub = m.with_columns(self.columns)
        return np.array([lab for _, lab in classifier.predict(self.model, sub)], dtype=bool)

    def to_dict(self) -> dict:
        d = {"method": self.method, "variant": self.variant, "columns": self.columns,
             "ranking": self.ranking, "provenance": self.provenance}
        if self.stm_model is not None:
            d["stm"] = self.stm_model.to_dict()
        else:
            d["classifier"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FittedMethod":
        for key in ("method", "variant", "columns"):
            if key not in d:
                raise ValueError(f"model file lacks {key!r}")
        return cls(
            d["method"], d["variant"], list(d["columns"]), list(d.get("ranking", [])),
            stm.StmModel.from_dict(d["stm"]) if "stm" in d else None,
            classifier.TrainedModel.from_dict(d["classifier"]) if "classifier" in d else None,
            d.get("provenance", {}),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "FittedMethod":
        return cls.from_dict(json.loads(Path(path).read_text()))


def importance_ranking(m: FeatureMatrix, seed: int = 0, config: dict | None = None) -> list[str]:
    cfg = dict(config or {})
    cfg.setdefault("seed", seed)
    forest = classifier.train_random_forest(m, cfg)
    return list(classifier.feature_importance(forest).names)


def fit_method(
    method: str,
    train: FeatureMatrix,
    variant: str = "All",
    metric: str = "f1",
    seed: int = 0,
    config: dict | None = None,
) -> FittedMethod:
    kind, attr = parse_method(method)
    if kind == "stm":
        values = train.column(attr)
        if attr in BINARY_FEATURES:
            model = stm.fit_binary(values.astype(bool), train.labels, metric, attr)
        else:
            model = stm.fit(values, train.labels, metric, attr)
        if model.degenerate:
            log.warning("STM on %s is degenerate: threshold equals the minimum value %r", attr, model.lambda_)
        return FittedMethod(method, "-", [attr], stm_model=model, provenance=dict(train.provenance))
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    ranking = [] if variant == "All" else importance_ranking(train, seed)
    cols = variant_columns(train.columns, VariantSpec(variant, tuple(ranking)))
    cfg = dict(config or {})
    cfg.setdefault("seed", seed)
    model = classifier.train(kind, train.with_columns(cols), cfg)
    return FittedMethod(method, variant, cols, ranking, model=model, provenance=dict(train.provenance))


# --------------------------------------------------------------------------
# Cross-validation
# --------------------------------------------------------------------------

Predictor = Callable[[FeatureMatrix], np.ndarray]
Trainer = Callable[[FeatureMatrix], Predictor]


def method_trainer(method: str, variant: str = "All", metric: str = "f1", seed: int = 0,
                   config: dict | None = None) -> Trainer:
    def trainer(m: FeatureMatrix) -> Predictor:
        return fit_method(method, m, variant, metric, seed, config).predict
    return trainer


def stratified_folds(labels, k: int, seed: int = 42) -> list[np.ndarray]:
    """Test-index sets of ``k`` stratified folds; each class is shuffled then dealt round-robin."""
    if k < 2:
        raise ValueError("k must be >= 2")
    y = np.asarray(labels, dtype=bool)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in (False, True):
        idx = np.flatnonzero(y == cls)
        if len(idx) < k:
            raise ValueError(f"class {cls} has {len(idx)} rows, fewer than k={k}")
        for pos, i in enumerate(rng.permutation(idx).tolist()):
            folds[pos % k].append(i)
    return [np.array(sorted(f), dtype=int) for f in folds]


@dataclass
class CvResult:
    mean: dict[str, float]
    folds: list[EvalReport]


def kfold_cv(m: FeatureMatrix, k: int, trainer: Trainer, seed: int = 42, context: dict | None = None) -> CvResult:
    folds = stratified_folds(m.labels, k, seed)
    reports = []
    all_idx = np.arange(len(m))
    for i, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(all_idx, test_idx)
        predictor = trainer(m.take(train_idx))
        test = m.take(test_idx)
        ctx = dict(context or {}, fold=i)
        reports.append(evaluate_predictions(test.labels, predictor(test), ctx))
    mean = {k_: float(np.mean([getattr(r.scores, k_) for r in reports]))
            for k_ in ("precision", "recall", "accuracy", "f1")}
    return CvResult(mean, reports)


# --------------------------------------------------------------------------
# Experiments
# --------------------------------------------------------------------------

@dataclass
class ExperimentPlan:
    train_start: datetime
    train_end: datetime
    horizons: list[int]
    variants: list[str] = field(default_factory=lambda: ["All"])
    method: str = "svm"
    window_days: int = DEFAULT_WINDOW_DAYS
    metric: str = "f1"
    seed: int = 0
    classifier_config: dict = field(default_factory=dict)
    mincut_sample_size: int | None = None
    mincut_sample_threshold: int = DEFAULT_SAMPLE_THRESHOLD

    def __post_init__(self):
        if self.window_days < 1:
            raise ValueError("window_days must be >= 1")
        if self.train_end <= self.train_start:
            raise ValueError("train_end must be after train_start")
        if any(h < 1 for h in self.horizons):
            raise ValueError("horizons must be whole months after train_end (>= 1)")
        if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ValueError("horizons must be strictly increasing")
        for v in self.variants:
            if v not in VARIANTS:
                raise ValueError(f"unknown variant {v!r}")
        parse_method(self.method)

    @property
    def train_window(self) -> str:
        return (f"{self.train_start:%Y-%m-%d}/{self.train_end:%Y-%m-%d}/{self.window_days}d")

    def horizon_start(self, months: int) -> datetime:
        return add_months(self.train_end, months)

    def to_dict(self) -> dict:
        return {
            "train_start": format_time(self.train_start),
            "train_end": format_time(self.train_end),
            "horizons": list(self.horizons),
            "variants": list(self.variants),
            "method": self.method,
            "window_days": self.window_days,
            "metric": self.metric,
            "seed": self.seed,
            "classifier_config": self.classifier_config,
            "mincut_sample_size": self.mincut_sample_size,
            "mincut_sample_threshold": self.mincut_sample_threshold,
        }


@dataclass
class Corpus:
    events: list[InteractionEvent]
    attrs: Mapping[str, MemberAttributes]


def training_snapshots(events, plan: ExperimentPlan) -> tuple[Snapshot, Snapshot]:
    g_t = build_snapshot(events, plan.train_start, plan.window_days, "t")
    g_t1 = build_snapshot(events, plan.train_end, plan.window_days, "t1")
    return g_t, g_t1


def horizon_snapshot(events, plan: ExperimentPlan, months: int) -> Snapshot:
    return build_snapshot(events, plan.horizon_start(months), plan.window_days, f"h{months}")


def matrix_for(snap_t: Snapshot, snap_future: Snapshot, attrs, plan: ExperimentPlan) -> FeatureMatrix:
    labeling = label_leaves(snap_t, snap_future)
    return assemble(snap_t, labeling, attrs, plan.mincut_sample_size, plan.mincut_sample_threshold, plan.seed)


def evaluate_fitted(fitted: FittedMethod, test: FeatureMatrix | None, context: dict) -> EvalReport:
    """Score ``fitted`` on ``test``; ``None`` marks a horizon without events."""
    ctx = dict(context, variant=fitted.variant, method=fitted.method)
    if test is None:
        return EvalReport(Confusion(), None, ctx)
    return evaluate_predictions(test.labels, fitted.predict(test), ctx)


def _fits(train: FeatureMatrix, plan: ExperimentPlan) -> list[FittedMethod]:
    kind, _ = parse_method(plan.method)
    variants = ["-"] if kind == "stm" else plan.variants
    return [fit_method(plan.method, train, v, plan.metric, plan.seed, plan.classifier_config) for v in variants]


def _horizon_reports(fits: list[FittedMethod], corpus_events, attrs, plan: ExperimentPlan,
                     train_window: str) -> list[EvalReport]:
    snap_t = build_snapshot(corpus_events, plan.train_start, plan.window_days, "t")
    reports = []
    for h in plan.horizons:
        snap_h = horizon_snapshot(corpus_events, plan, h)
        if snap_h.n_events == 0:
            log.warning("horizon %d months has no events; row flagged empty", h)
            test = None
        elif len(snap_t.graph) == 0:
            test = None
        else:
            test = matrix_for(snap_t, snap_h, attrs, plan)
        for fitted in fits:
            reports.append(evaluate_fitted(fitted, test, {"train_window": train_window, "horizon_months": h}))
    return reports


def fit_plan(events, attrs, plan: ExperimentPlan) -> tuple[FeatureMatrix, list[FittedMethod]]:
    g_t, g_t1 = training_snapshots(events, plan)
    if len(g_t.graph) == 0:
        raise ValueError(f"no interactions in the training window starting {format_time(plan.train_start)}")
    train = matrix_for(g_t, g_t1, attrs, plan)
    return train, _fits(train, plan)


def run_horizon_experiment(events, attrs, plan: ExperimentPlan) -> list[EvalReport]:
    """One report per (horizon, variant), in plan order."""
    if not plan.horizons:
        return []
    _, fits = fit_plan(events, attrs, plan)
    return _horizon_reports(fits, events, attrs, plan, plan.train_window)


def run_cross_dataset(train_corpus: Corpus, test_corpus: Corpus, plan: ExperimentPlan,
                      test_plan: ExperimentPlan | None = None) -> list[EvalReport]:
    """Fit on ``train_corpus`` and evaluate on ``test_corpus``'s horizons.

    ``test_plan`` supplies the test corpus's own dates (defaults to ``plan``);
    method, variants and seed always come from ``plan``. Test labels are
    never visible to fitting.
    """
    if not plan.horizons:
        return []
    test_plan = test_plan or plan
    _, fits = fit_plan(train_corpus.events, train_corpus.attrs, plan)
    window = plan.train_window if test_plan is plan else f"{plan.train_window}->{test_plan.train_window}"
    return _horizon_reports(fits, test_corpus.events, test_corpus.attrs, test_plan, window)
