"""Binary classifiers for the leave label: logistic regression, linear SVM, random forest.

All models standardize their inputs with parameters learned on the training
matrix and expose ``P(leave | x)``; the predicted label is
``probability >= decision_threshold``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FeatureMatrix

KINDS = ("logreg", "linear_svm", "random_forest")

LOGREG_DEFAULTS = {"lr": "auto", "epochs": 2000, "l2": 1e-3, "tol": 1e-6, "seed": 0}
SVM_DEFAULTS = {"lr": 1.0, "epochs": 2000, "reg": 1e-3, "seed": 0}
FOREST_DEFAULTS = {"n_trees": 100, "max_depth": None, "min_samples_split": 2, "max_features": None, "seed": 0}


class ModelError(ValueError):
    pass


# --------------------------------------------------------------------------
# Standardization
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StandardizationParams:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationParams":
        return cls(np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float))


def fit_standardizer(m: FeatureMatrix | np.ndarray) -> StandardizationParams:
    x = m.values if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=float)
    if len(x) == 0:
        raise ValueError("cannot standardize an empty matrix")
    return StandardizationParams(x.mean(axis=0), x.std(axis=0))


def apply_standardizer(params: StandardizationParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    safe = np.where(params.std > 0, params.std, 1.0)
    z = (x - params.mean) / safe
    z[:, params.std == 0] = 0.0
    return z


def apply(params: StandardizationParams, m: FeatureMatrix) -> FeatureMatrix:
    return FeatureMatrix(list(m.node_ids), list(m.columns), apply_standardizer(params, m.values),
                         m.labels.copy(), dict(m.provenance))


# --------------------------------------------------------------------------
# Logistic regression
# --------------------------------------------------------------------------

def sigmoid(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-np.logaddexp(0.0, -z))


def logistic_loss(w: np.ndarray, b: float, x: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Mean negative log-likelihood plus ``l2 / 2 * ||w||^2``."""
    z = x @ w + b
    # -log sigmoid(z) for y=1, -log(1 - sigmoid(z)) for y=0
    nll = np.where(y, np.logaddexp(0.0, -z), np.logaddexp(0.0, z))
    return float(nll.mean() + 0.5 * l2 * (w @ w))


def logistic_gradient(w: np.ndarray, b: float, x: np.ndarray, y: np.ndarray, l2: float) -> tuple[np.ndarray, float]:
    r = sigmoid(x @ w + b) - y
    return x.T @ r / len(y) + l2 * w, float(r.mean())


def _labels_or_raise(m: FeatureMatrix) -> np.ndarray:
    y = m.labels.astype(bool)
    if y.all() or not y.any():
        raise ModelError("training set has a single class; need both leavers and stayers")
    return y


@dataclass
class TrainedModel:
    kind: str
    columns: list[str]
    standardization: StandardizationParams
    weights: np.ndarray | None = None
    bias: float = 0.0
    trees: list[dict] = field(default_factory=list)
    decision_threshold: float = 0.5
    config: dict = field(default_factory=dict)
    n_iter: int = 0

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "columns": list(self.columns),
            "standardization": self.standardization.to_dict(),
            "decision_threshold": self.decision_threshold,
            "training_config": self.config,
        }
        if self.kind == "random_forest":
            d["trees"] = self.trees
        else:
            d["weights"] = self.weights.tolist()
            d["bias"] = self.bias
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        kind = d.get("kind")
        if kind not in KINDS:
            raise ModelError(f"unknown model kind {kind!r}")
        return cls(
            kind=kind,
            columns=list(d["columns"]),
            standardization=StandardizationParams.from_dict(d["standardization"]),
            weights=np.array(d["weights"], dtype=float) if "weights" in d else None,
            bias=float(d.get("bias", 0.0)),
            trees=d.get("trees", []),
            decision_threshold=float(d.get("decision_threshold", 0.5)),
            config=d.get("training_config", {}),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")


def _config(defaults: dict, config: dict | None) -> dict:
    cfg = dict(defaults)
    if config:
        unknown = set(config) - set(defaults)
        if unknown:
            raise ModelError(f"unknown config keys {sorted(unknown)}")
        cfg.update(config)
    return cfg


def lipschitz_step(x: np.ndarray, l2: float) -> float:
    """``1 / L`` for the logistic objective's gradient (bias included); GD with it never increases the loss."""
    xb = np.hstack([x, np.ones((len(x), 1))])
    lam = float(np.linalg.eigvalsh(xb.T @ xb / len(x)).max())
    return 1.0 / (0.25 * lam + l2)


def train_logreg(m: FeatureMatrix, config: dict | None = None) -> TrainedModel:
    """L2-regularized logistic regression by full-batch gradient descent from zero weights.

    ``lr="auto"`` uses ``lipschitz_step``.
    """
    cfg = _config(LOGREG_DEFAULTS, config)
    y = _labels_or_raise(m).astype(float)
    params = fit_standardizer(m)
    x = apply_standardizer(params, m.values)
    lr = lipschitz_step(x, cfg["l2"]) if cfg["lr"] == "auto" else float(cfg["lr"])
    w = np.zeros(x.shape[1])
    b = 0.0
    it = 0
    for it in range(1, int(cfg["epochs"]) + 1):
        gw, gb = logistic_gradient(w, b, x, y, cfg["l2"])
        if max(np.max(np.abs(gw), initial=0.0), abs(gb)) < cfg["tol"]:
            break
        w = w - lr * gw
        b = b - lr * gb
    return TrainedModel("logreg", list(m.columns), params, w, b, config=cfg, n_iter=it)


# --------------------------------------------------------------------------
# Linear SVM
# --------------------------------------------------------------------------

def hinge_objective(w: np.ndarray, b: float, x: np.ndarray, y_pm: np.ndarray, reg: float) -> float:
    """``reg / 2 * ||w||^2`` plus the mean hinge loss; ``y_pm`` in {-1, +1}."""
    margins = y_pm * (x @ w + b)
    return float(0.5 * reg * (w @ w) + np.maximum(0.0, 1.0 - margins).mean())


def train_linear_svm(m: FeatureMatrix, config: dict | None = None) -> TrainedModel:
    """Soft-margin linear SVM by full-batch subgradient descent.

    Step size ``lr / sqrt(t)``; the iterate with the lowest objective is kept.
    Full-batch steps make the result independent of any shuffling.
    """
    cfg = _config(SVM_DEFAULTS, config)
    y = np.where(_labels_or_raise(m), 1.0, -1.0)
    params = fit_standardizer(m)
    x = apply_standardizer(params, m.values)
    n = len(y)
    w = np.zeros(x.shape[1])
    b = 0.0
    best = (hinge_objective(w, b, x, y, cfg["reg"]), w.copy(), b)
    for t in range(1, int(cfg["epochs"]) + 1):
        active = y * (x @ w + b) < 1.0
        gw = cfg["reg"] * w - (y[active, None] * x[active]).sum(axis=0) / n
        gb = -y[active].sum() / n
        step = cfg["lr"] / math.sqrt(t)
        w = w - step * gw
        b = b - step * gb
        obj = hinge_objective(w, b, x, y, cfg["reg"])
        if obj < best[0]:
            best = (obj, w.copy(), b)
    _, w, b = best
    return TrainedModel("linear_svm", list(m.columns), params, w, float(b), config=cfg, n_iter=int(cfg["epochs"]))


# --------------------------------------------------------------------------
# Random forest
# --------------------------------------------------------------------------

def gini(counts: np.ndarray) -> np.ndarray:
    """Gini impurity of (negatives, positives) weight pairs along the last axis."""
    counts = np.asarray(counts, dtype=float)
    tot = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / tot[..., None]
    return np.where(tot > 0, 1.0 - (p * p).sum(axis=-1), 0.0)


def _best_split(x: np.ndarray, y: np.ndarray, w: np.ndarray, features: Sequence[int]):
    """Best Gini split among ``features``. Returns ``(feature, threshold, decrease)`` or None."""
    tot = np.array([w[~y].sum(), w[y].sum()])
    parent = float(gini(tot))
    wsum = tot.sum()
    best = None
    for f in features:
        col = x[:, f]
        order = np.argsort(col, kind="stable")
        xs, ys, ws = col[order], y[order], w[order]
        pos = np.cumsum(ws * ys)
        all_ = np.cumsum(ws)
        cut = np.flatnonzero(xs[1:] > xs[:-1])
        if len(cut) == 0:
            continue
        left = np.stack([all_[cut] - pos[cut], pos[cut]], axis=1)
        right = tot - left
        lw, rw = left.sum(axis=1), right.sum(axis=1)
        child = (lw * gini(left) + rw * gini(right)) / wsum
        k = int(np.argmin(child))
        decrease = parent - float(child[k])
        if best is None or decrease > best[2]:
            thr = (xs[cut[k]] + xs[cut[k] + 1]) / 2.0
            if not thr < xs[cut[k] + 1]:
                thr = xs[cut[k]]
            best = (int(f), float(thr), decrease)
    return best


def _grow(x, y, w, depth, cfg, rng, n_features):
    counts = [float(w[~y].sum()), float(w[y].sum())]
    node = {"leaf_class_counts": counts}
    max_depth = cfg["max_depth"]
    if counts[0] == 0 or counts[1] == 0 or sum(counts) < cfg["min_samples_split"]:
        return node
    if max_depth is not None and depth >= max_depth:
        return node
    # sample features in random order; keep drawing past constant ones
    order = rng.permutation(x.shape[1])
    usable = [f for f in order.tolist() if x[:, f].max() > x[:, f].min()]
    features = usable[:n_features]
    split = _best_split(x, y, w, features) if features else None
    if split is None or split[2] <= 0.0:
        return node
    f, thr, _ = split
    mask = x[:, f] <= thr
    node.update({
        "feature": f,
        "threshold": thr,
        "left": _grow(x[mask], y[mask], w[mask], depth + 1, cfg, rng, n_features),
        "right": _grow(x[~mask], y[~mask], w[~mask], depth + 1, cfg, rng, n_features),
    })
    return node


def _unique_rows(x: np.ndarray, y: np.ndarray):
    """Distinct (features, label) rows in first-occurrence order, with multiplicities."""
    seen: dict[tuple, int] = {}
    idx, mult = [], []
    for i, key in enumerate(zip(map(tuple, x.tolist()), y.tolist())):
        j = seen.get(key)
        if j is None:
            seen[key] = len(idx)
            idx.append(i)
            mult.append(1)
        else:
            mult[j] += 1
    return np.array(idx, dtype=int), np.array(mult, dtype=float)


def train_random_forest(m: FeatureMatrix, config: dict | None = None) -> TrainedModel:
    """Bagged CART trees with Gini splits.

    Identical rows are merged and carried as weights, and each tree's
    bootstrap draws distinct rows with replacement, so duplicating the
    training set yields the same forest. Per-tree random streams are spawned
    from the master seed.
    """
    cfg = _config(FOREST_DEFAULTS, config)
    y_all = _labels_or_raise(m)
    # splits are scale-free, so trees keep raw units
    p = len(m.columns)
    params = StandardizationParams(np.zeros(p), np.ones(p))
    x_all = m.values
    idx, mult = _unique_rows(x_all, y_all)
    x, y = x_all[idx], y_all[idx]
    n_features = cfg["max_features"] or max(1, int(round(math.sqrt(p))))
    trees = []
    for seq in np.random.SeedSequence(cfg["seed"]).spawn(int(cfg["n_trees"])):
        rng = np.random.default_rng(seq)
        draws = np.bincount(rng.integers(0, len(idx), size=len(idx)), minlength=len(idx))
        keep = draws > 0
        w = draws[keep] * mult[keep]
        trees.append(_grow(x[keep], y[keep], w, 0, cfg, rng, n_features))
    return TrainedModel("random_forest", list(m.columns), params, trees=trees, config=cfg)


def _tree_votes(tree: dict, x: np.ndarray) -> np.ndarray:
    out = np.empty(len(x), dtype=bool)
    stack = [(tree, np.arange(len(x)))]
    while stack:
        node, rows = stack.pop()
        if "feature" not in node:
            neg, pos = node["leaf_class_counts"]
            out[rows] = pos > neg
            continue
        go_left = x[rows, node["feature"]] <= node["threshold"]
        stack.append((node["left"], rows[go_left]))
        stack.append((node["right"], rows[~go_left]))
    return out


def _tree_importance(tree: dict, p: int) -> np.ndarray:
    """Weighted impurity decrease per feature, recomputed from the stored tree."""
    imp = np.zeros(p)
    total = sum(tree["leaf_class_counts"])
    stack = [tree]
    while stack:
        node = stack.pop()
        if "feature" not in node:
            continue
        l, r = node["left"], node["right"]
        nw, lw, rw = (sum(k["leaf_class_counts"]) for k in (node, l, r))
        dec = gini(node["leaf_class_counts"]) - (lw * gini(l["leaf_class_counts"]) + rw * gini(r["leaf_class_counts"])) / nw
        imp[node["feature"]] += nw / total * float(dec)
        stack.extend((l, r))
    return imp


@dataclass(frozen=True)
class ImportanceRanking:
    items: tuple[tuple[str, float], ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.items)

    def as_dict(self) -> dict[str, float]:
        return dict(self.items)


def feature_importance(model: TrainedModel) -> ImportanceRanking:
    """Mean decrease in Gini impurity, averaged over trees and normalized to sum to 1.

    Ties are ordered by column position. A forest without any split gives
    uniform weights.
    """
    if model.kind != "random_forest":
        raise ModelError("feature importance needs a random forest model")
    p = len(model.columns)
    per_tree = np.array([_tree_importance(t, p) for t in model.trees]).reshape(-1, p)
    mean = per_tree.mean(axis=0) if len(per_tree) else np.zeros(p)
    total = mean.sum()
    weights = mean / total if total > 0 else np.full(p, 1.0 / p)
    order = sorted(range(p), key=lambda i: (-weights[i], i))
    return ImportanceRanking(tuple((model.columns[i], float(weights[i])) for i in order))


# --------------------------------------------------------------------------
# Prediction
# --------------------------------------------------------------------------

TRAINERS = {
    "logreg": train_logreg,
    "linear_svm": train_linear_svm,
    "random_forest": train_random_forest,
}
ALIASES = {"svm": "linear_svm", "forest": "random_forest", "rf": "random_forest", "lr": "logreg"}


def train(kind: str, m: FeatureMatrix, config: dict | None = None) -> TrainedModel:
    kind = ALIASES.get(kind, kind)
    if kind not in TRAINERS:
        raise ModelError(f"unknown classifier {kind!r}")
    return TRAINERS[kind](m, config)


def predict_proba(model: TrainedModel, m: FeatureMatrix) -> np.ndarray:
    if list(m.columns) != list(model.columns):
        extra = [c for c in m.columns if c not in model.columns]
        absent = [c for c in model.columns if c not in m.columns]
        raise ModelError(
            f"column mismatch: unexpected {extra}, missing {absent}"
            + ("" if extra or absent else " (order differs)")
        )
    x = apply_standardizer(model.standardization, m.values)
    if model.kind == "random_forest":
        if not model.trees:
            return np.zeros(len(x))
        votes = np.zeros(len(x))
        for tree in model.trees:
            votes += _tree_votes(tree, x)
        return votes / len(model.trees)
    return sigmoid(x @ model.weights + model.bias)


def predict(model: TrainedModel, m: FeatureMatrix) -> list[tuple[float, bool]]:
    """``(probability, label)`` per row with ``label = probability >= decision_threshold``."""
    prob = predict_proba(model, m)
    return [(float(p), bool(p >= model.decision_threshold)) for p in prob]
