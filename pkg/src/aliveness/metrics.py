"""Confusion counts and the precision / recall / accuracy / F1 measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METRICS = ("f1", "accuracy", "precision", "recall")


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_predictions(cls, actual, predicted) -> "Confusion":
        a = np.asarray(actual, dtype=bool)
        p = np.asarray(predicted, dtype=bool)
        if a.shape != p.shape:
            raise ValueError("actual and predicted lengths differ")
        return cls(
            tp=int(np.sum(a & p)),
            fp=int(np.sum(~a & p)),
            fn=int(np.sum(a & ~p)),
            tn=int(np.sum(~a & ~p)),
        )


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def precision(tp: int, fp: int) -> float:
    return _ratio(tp, tp + fp)


def recall(tp: int, fn: int) -> float:
    return _ratio(tp, tp + fn)


def accuracy(tp: int, fp: int, fn: int, tn: int) -> float:
    return _ratio(tp + tn, tp + fp + fn + tn)


def f1(tp: int, fp: int, fn: int) -> float:
    p, r = precision(tp, fp), recall(tp, fn)
    return 2 * p * r / (p + r) if p + r else 0.0


def score(metric: str, tp: int, fp: int, fn: int, tn: int) -> float:
    """Single named measure; zero denominators give 0."""
    if metric == "f1":
        return f1(tp, fp, fn)
    if metric == "accuracy":
        return accuracy(tp, fp, fn, tn)
    if metric == "precision":
        return precision(tp, fp)
    if metric == "recall":
        return recall(tp, fn)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    accuracy: float
    f1: float
    degenerate: tuple[str, ...] = ()


def metrics(c: Confusion) -> Scores:
    """The four measures of ``c``; measures with a zero denominator are 0 and listed in ``degenerate``."""
    if c.total == 0:
        raise ValueError("empty confusion: nothing was evaluated")
    flags = []
    if c.tp + c.fp == 0:
        flags.append("precision")
    if c.tp + c.fn == 0:
        flags.append("recall")
    p, r = precision(c.tp, c.fp), recall(c.tp, c.fn)
    if p + r == 0:
        flags.append("f1")
    return Scores(p, r, accuracy(c.tp, c.fp, c.fn, c.tn), f1(c.tp, c.fp, c.fn), tuple(flags))
