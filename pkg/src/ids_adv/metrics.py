"""Confusion-matrix metrics, classification report, ROC curve and AUC.

Class 1 (attack traffic) is the positive class throughout. Zero-division
conventions: precision, recall and F1 are defined as 0 when their
denominator is 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateLabels,
    EmptyEvaluation,
    LengthMismatch,
    NonBinaryLabel,
)


@dataclass
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass
class EvalSummary:
    """Aggregate metrics for one evaluation pass.

    ``precision``/``recall``/``f1`` carry the aggregate selected when the
    summary was built (support-weighted by default); per-class values are
    always available in ``per_class``.
    """

    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float
    support: int
    average: str
    per_class: dict = field(default_factory=dict)
    roc_fpr: np.ndarray = field(default_factory=lambda: np.empty(0))
    roc_tpr: np.ndarray = field(default_factory=lambda: np.empty(0))
    roc_thresholds: np.ndarray = field(default_factory=lambda: np.empty(0))

    def to_dict(self) -> dict:
        def _thr(t):
            return None if not np.isfinite(t) else float(t)

        return {
            "accuracy": float(self.accuracy),
            "precision": float(self.precision),
            "recall": float(self.recall),
            "f1": float(self.f1),
            "auc": float(self.auc),
            "support": int(self.support),
            "average": self.average,
            "per_class": {
                str(c): {k: (int(v) if k == "support" else float(v)) for k, v in m.items()}
                for c, m in self.per_class.items()
            },
            "roc": [
                [float(f), float(t), _thr(th)]
                for f, t, th in zip(self.roc_fpr, self.roc_tpr, self.roc_thresholds)
            ],
        }


def _binary_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values).ravel()
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise NonBinaryLabel(f"{name} contains values outside {{0, 1}}")
    return arr.astype(np.int64)


def confusion(y_true, y_pred) -> ConfusionCounts:
    """Count tp/tn/fp/fn with class 1 as positive. Empty input gives all zeros."""
    yt = _binary_vector(y_true, "y_true")
    yp = _binary_vector(y_pred, "y_pred")
    if yt.shape[0] != yp.shape[0]:
        raise LengthMismatch(f"y_true has {yt.shape[0]} entries, y_pred has {yp.shape[0]}")
    return ConfusionCounts(
        tp=int(np.sum((yt == 1) & (yp == 1))),
        tn=int(np.sum((yt == 0) & (yp == 0))),
        fp=int(np.sum((yt == 0) & (yp == 1))),
        fn=int(np.sum((yt == 1) & (yp == 0))),
    )


def metrics(counts: ConfusionCounts) -> tuple[float, float, float, float]:
    """Accuracy, precision, recall and F1 from confusion counts."""
    total = counts.total
    if total == 0:
        raise EmptyEvaluation("no samples to evaluate")
    accuracy = (counts.tp + counts.tn) / total
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp > 0 else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return accuracy, precision, recall, f1


def weighted_report(y_true, y_pred) -> dict:
    """Per-class precision/recall/F1 plus support-weighted and macro averages."""
    yt = _binary_vector(y_true, "y_true")
    yp = _binary_vector(y_pred, "y_pred")
    if yt.shape[0] != yp.shape[0]:
        raise LengthMismatch(f"y_true has {yt.shape[0]} entries, y_pred has {yp.shape[0]}")
    if yt.size == 0:
        raise EmptyEvaluation("no samples to evaluate")

    per_class = {}
    for c in (0, 1):
        # treat class c as positive
        tp = int(np.sum((yt == c) & (yp == c)))
        fp = int(np.sum((yt != c) & (yp == c)))
        fn = int(np.sum((yt == c) & (yp != c)))
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        per_class[c] = {"precision": p, "recall": r, "f1": f, "support": int(np.sum(yt == c))}

    total = yt.size
    weights = {c: per_class[c]["support"] / total for c in (0, 1)}
    report = {
        "accuracy": float(np.mean(yt == yp)),
        "per_class": per_class,
        "weighted": {
            k: sum(weights[c] * per_class[c][k] for c in (0, 1))
            for k in ("precision", "recall", "f1")
        },
        "macro": {
            k: 0.5 * sum(per_class[c][k] for c in (0, 1))
            for k in ("precision", "recall", "f1")
        },
    }
    return report


def roc_auc(y_true, scores) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """ROC curve points and AUC from decision scores.

    Thresholds sweep the distinct scores in descending order; equal scores
    collapse into one step. Returns (fpr, tpr, thresholds, auc) where the
    first point is (0, 0) at threshold +inf and the last is (1, 1). AUC is
    the trapezoidal area under the curve.
    """
    yt = _binary_vector(y_true, "y_true")
    s = np.asarray(scores, dtype=np.float64).ravel()
    if yt.shape[0] != s.shape[0]:
        raise LengthMismatch(f"y_true has {yt.shape[0]} entries, scores has {s.shape[0]}")
    n_pos = int(np.sum(yt == 1))
    n_neg = int(np.sum(yt == 0))
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("ROC/AUC needs both classes present")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = yt[order]
    tps = np.cumsum(y_sorted)
    fps = np.cumsum(1 - y_sorted)
    # keep the last index of every tie group so each distinct score is one step
    last = np.r_[np.flatnonzero(np.diff(s_sorted)), s_sorted.size - 1]

    fpr = np.r_[0.0, fps[last] / n_neg]
    tpr = np.r_[0.0, tps[last] / n_pos]
    thresholds = np.r_[np.inf, s_sorted[last]]
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) * 0.5))
    return fpr, tpr, thresholds, auc


def evaluate_scores(y_true, scores, threshold: float = 0.5, average: str = "weighted") -> EvalSummary:
    """Build a full EvalSummary from true labels and probability scores."""
    if average not in ("weighted", "macro", "binary"):
        raise ValueError(f"unknown average {average!r}")
    yt = _binary_vector(y_true, "y_true")
    s = np.asarray(scores, dtype=np.float64).ravel()
    preds = (s >= threshold).astype(np.int64)
    report = weighted_report(yt, preds)
    fpr, tpr, thr, auc = roc_auc(yt, s)
    agg = report["per_class"][1] if average == "binary" else report[average]
    return EvalSummary(
        accuracy=report["accuracy"],
        precision=agg["precision"],
        recall=agg["recall"],
        f1=agg["f1"],
        auc=auc,
        support=int(yt.size),
        average=average,
        per_class=report["per_class"],
        roc_fpr=fpr,
        roc_tpr=tpr,
        roc_thresholds=thr,
    )
