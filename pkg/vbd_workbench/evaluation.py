"""
Confusion-matrix metrics and rank-based ROC AUC.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, NamedTuple, Optional

import numpy as np
from scipy.stats import rankdata

from vbd_workbench.exceptions import ValidationError

logger = logging.getLogger("vbd-workbench.evaluation")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with positive = label 1."""

    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fn", "fp", "tn"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0, got {getattr(self, name)}")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float
    degenerate: bool


@dataclass(frozen=True)
class MetricsReport:
    """Precision, recall, F1 and optional AUC; `degenerate` marks a zero denominator."""

    precision: float
    recall: float
    f1: float
    auc: Optional[float] = None
    degenerate: bool = False

    @classmethod
    def from_confusion(cls, matrix: ConfusionMatrix, auc: Optional[float] = None) -> "MetricsReport":
        scores = precision_recall_f1(matrix)
        return cls(scores.precision, scores.recall, scores.f1, auc, scores.degenerate)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _binary_labels(values: Any, name: str) -> np.ndarray:
    array = np.asarray(values)
    if array.ndim != 1:
        raise ValidationError(f"{name}: expected a 1-D label sequence, got shape {array.shape}")
    if not np.isin(array, (0, 1)).all():
        raise ValidationError(f"{name}: labels must be 0 or 1")
    return array.astype(np.int64)


def confusion(y_true: Any, y_pred: Any) -> ConfusionMatrix:
    """Count TP, FN, FP and TN for binary labels."""
    y_true = _binary_labels(y_true, "y_true")
    y_pred = _binary_labels(y_pred, "y_pred")
    if y_true.shape != y_pred.shape:
        raise ValidationError(f"length mismatch: {y_true.shape[0]} true labels vs {y_pred.shape[0]} predictions")
    return ConfusionMatrix(
        tp=int(np.sum((y_true == 1) & (y_pred == 1))),
        fn=int(np.sum((y_true == 1) & (y_pred == 0))),
        fp=int(np.sum((y_true == 0) & (y_pred == 1))),
        tn=int(np.sum((y_true == 0) & (y_pred == 0))),
    )


def precision_recall_f1(m: ConfusionMatrix) -> PRF:
    """
    precision = TP/(TP+FP), recall = TP/(TP+FN), F1 = 2PR/(P+R).

    A zero denominator yields 0 for that metric and sets `degenerate`.
    """
    degenerate = False
    if m.tp + m.fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = m.tp / (m.tp + m.fp)
    if m.tp + m.fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = m.tp / (m.tp + m.fn)
    if precision + recall == 0:
        f1, degenerate = 0.0, True
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return PRF(precision, recall, f1, degenerate)


def roc_auc(y_true: Any, scores: Any) -> float:
    """
    Mann-Whitney AUC: the share of (positive, negative) pairs ranked correctly, ties counting 1/2.
    """
    y_true = _binary_labels(y_true, "y_true")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != y_true.shape:
        raise ValidationError(f"length mismatch: {y_true.shape[0]} labels vs {scores.shape[0]} scores")
    positives = int(y_true.sum())
    negatives = y_true.shape[0] - positives
    if positives == 0 or negatives == 0:
        raise ValidationError("roc_auc needs both classes in y_true")

    ranks = rankdata(scores, method="average")
    rank_sum = float(ranks[y_true == 1].sum())
    return (rank_sum - positives * (positives + 1) / 2.0) / (positives * negatives)
