"""Binary confusion-matrix metrics with female (=1) as the positive class."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyEvaluation


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionMatrix":
        t = np.asarray(y_true, dtype=np.int64)
        p = np.asarray(y_pred, dtype=np.int64)
        if t.shape != p.shape:
            raise ValueError("label and prediction arrays differ in shape")
        return cls(
            tp=int(np.sum((t == 1) & (p == 1))),
            fp=int(np.sum((t == 0) & (p == 1))),
            fn=int(np.sum((t == 1) & (p == 0))),
            tn=int(np.sum((t == 0) & (p == 0))),
        )


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    degenerate: bool = False  # some ratio was 0/0 and reported as 0


def _ratio(num: float, den: float) -> tuple[float, bool]:
    return (num / den, False) if den else (0.0, True)


def f1_score(precision: float, recall: float) -> tuple[float, bool]:
    return _ratio(2.0 * precision * recall, precision + recall)


def compute_metrics(cm: ConfusionMatrix) -> Metrics:
    if cm.total <= 0:
        raise EmptyEvaluation("no samples to evaluate")
    accuracy = (cm.tp + cm.tn) / cm.total
    precision, d1 = _ratio(cm.tp, cm.tp + cm.fp)
    recall, d2 = _ratio(cm.tp, cm.tp + cm.fn)
    f1, d3 = f1_score(precision, recall)
    return Metrics(accuracy, precision, recall, f1, d1 or d2 or d3)
