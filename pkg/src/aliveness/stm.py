"""Simple Threshold Model: predict leaving from one attribute and a fitted threshold.

A model predicts "leaves" for ``value < lambda`` (``leave_if_below``) or for
``value >= lambda`` (``leave_if_at_or_above``). Candidate thresholds are the
observed attribute values; both orientations are scanned and the best
(score, then smaller lambda, then ``leave_if_below``) wins.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .metrics import METRICS, score

BELOW = "leave_if_below"
AT_OR_ABOVE = "leave_if_at_or_above"
ORIENTATIONS = (BELOW, AT_OR_ABOVE)


@dataclass(frozen=True)
class StmModel:
    attribute: str
    lambda_: float
    orientation: str
    metric: str
    training_score: float
    degenerate: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return {k: d[k] for k in ("attribute", "lambda", "orientation", "metric", "training_score", "degenerate")}

    @classmethod
    def from_dict(cls, d: dict) -> "StmModel":
        if d.get("orientation") not in ORIENTATIONS:
            raise ValueError(f"bad orientation {d.get('orientation')!r}")
        return cls(str(d["attribute"]), float(d["lambda"]), d["orientation"], d["metric"],
                   float(d["training_score"]), bool(d["degenerate"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class Candidate:
    lambda_: float
    orientation: str
    score: float


def best_candidate(candidates: Sequence[Candidate]) -> int:
    """Index of the winning candidate: highest score, then smallest lambda, then ``leave_if_below``."""
    if not candidates:
        raise ValueError("no candidates")
    key = lambda i: (-candidates[i].score, candidates[i].lambda_, ORIENTATIONS.index(candidates[i].orientation))
    return min(range(len(candidates)), key=key)


def scan(values: Sequence[float], labels: Sequence[bool], metric: str = "f1") -> list[Candidate]:
    """Score every (observed value, orientation) pair.

    Runs in O(n log n): after sorting, the confusion counts for every cut
    come from prefix sums of the labels.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    x = np.asarray(values, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("values and labels must be equal-length 1-d sequences")
    if len(x) == 0:
        raise ValueError("empty input")
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    pos_total = int(ys.sum())
    neg_total = len(ys) - pos_total
    distinct, first = np.unique(xs, return_index=True)
    # below[j]: counts among values < distinct[j]
    pos_cum = np.concatenate(([0], np.cumsum(ys)))
    out = []
    for lam, i in zip(distinct.tolist(), first.tolist()):
        pos_below = int(pos_cum[i])
        neg_below = i - pos_below
        # leave_if_below: predicted positive = values below lambda
        tp, fp = pos_below, neg_below
        fn, tn = pos_total - tp, neg_total - fp
        out.append(Candidate(lam, BELOW, score(metric, tp, fp, fn, tn)))
        # leave_if_at_or_above: the complement
        out.append(Candidate(lam, AT_OR_ABOVE, score(metric, fn, tn, tp, fp)))
    return out


def fit(values: Sequence[float], labels: Sequence[bool], metric: str = "f1", attribute: str = "") -> StmModel:
    """Choose the threshold among the observed values that maximizes ``metric``.

    With single-class labels the threshold is pinned to the minimum value
    (a constant predictor) and the model is flagged degenerate.
    """
    cands = scan(values, labels, metric)
    y = np.asarray(labels, dtype=bool)
    lo = float(np.min(np.asarray(values, dtype=float)))
    if y.all() or not y.any():
        cands = [c for c in cands if c.lambda_ == lo]
    best = cands[best_candidate(cands)]
    return StmModel(attribute, best.lambda_, best.orientation, metric, best.score, best.lambda_ == lo)


def predict(model: StmModel, values: Sequence[float]) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if model.orientation == BELOW:
        return x < model.lambda_
    if model.orientation == AT_OR_ABOVE:
        return x >= model.lambda_
    raise ValueError(f"bad orientation {model.orientation!r}")


@dataclass(frozen=True)
class BinaryResult:
    score: float
    inverted: bool


def evaluate_binary_attribute(values: Sequence[bool], labels: Sequence[bool], metric: str = "f1") -> BinaryResult:
    """Use a boolean attribute directly as the prediction, trying both polarities.

    The direct polarity wins ties.
    """
    v = np.asarray(values, dtype=bool)
    y = np.asarray(labels, dtype=bool)
    if v.shape != y.shape:
        raise ValueError("values and labels must have equal length")
    if len(v) == 0:
        raise ValueError("empty input")
    tp, fp = int(np.sum(v & y)), int(np.sum(v & ~y))
    fn, tn = int(np.sum(~v & y)), int(np.sum(~v & ~y))
    direct = score(metric, tp, fp, fn, tn)
    flipped = score(metric, fn, tn, tp, fp)
    return BinaryResult(flipped, True) if flipped > direct else BinaryResult(direct, False)


def fit_binary(values: Sequence[bool], labels: Sequence[bool], metric: str = "f1", attribute: str = "") -> StmModel:
    """Express the binary-attribute path as a threshold model at 1 (no search)."""
    res = evaluate_binary_attribute(values, labels, metric)
    return StmModel(attribute, 1.0, BELOW if res.inverted else AT_OR_ABOVE, metric, res.score, False)
