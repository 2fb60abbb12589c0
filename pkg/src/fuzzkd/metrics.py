"""Confusion matrix, per-class precision/recall/F1, ROC and PR curves.

Multiclass metrics are one-vs-rest with macro averaging. Zero-denominator
metrics evaluate to 0 and the class is flagged degenerate, so reports stay
total. Curves are threshold sweeps over the unique scores (ties share a
threshold); AUC is trapezoidal, average precision a step integral.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MetricsError(ValueError):
    """Raised on malformed labels, scores or matrices."""


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    degenerate: bool = False


@dataclass
class MetricsReport:
    accuracy: float
    per_class: dict[str, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    roc_auc: dict[str, float] = field(default_factory=dict)
    average_precision: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class": {
                name: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                    "degenerate": m.degenerate,
                }
                for name, m in self.per_class.items()
            },
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "auc": {
                "roc": dict(self.roc_auc),
                "average_precision": dict(self.average_precision),
            },
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def confusion(true_labels, predicted_labels, n_classes: int) -> np.ndarray:
    """Count matrix with rows = true class, columns = predicted class."""
    t = np.asarray(true_labels, dtype=np.int64).reshape(-1)
    p = np.asarray(predicted_labels, dtype=np.int64).reshape(-1)
    if t.shape != p.shape:
        raise MetricsError(f"label lengths differ: {t.shape[0]} vs {p.shape[0]}")
    if n_classes < 2:
        raise MetricsError(f"need >= 2 classes, got {n_classes}")
    for name, arr in (("true", t), ("predicted", p)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise MetricsError(f"{name} labels outside [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def summarize(cm: np.ndarray, class_names=None) -> MetricsReport:
    """One-vs-rest precision/recall/F1 per class plus overall accuracy."""
    cm = np.asarray(cm, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] < 2:
        raise MetricsError(f"confusion matrix must be square KxK, got {cm.shape}")
    if cm.min() < 0:
        raise MetricsError("negative counts")
    total = int(cm.sum())
    if total == 0:
        raise MetricsError("empty confusion matrix")
    k = cm.shape[0]
    names = [str(i) for i in range(k)] if class_names is None else list(class_names)
    if len(names) != k:
        raise MetricsError(f"{len(names)} class names for a {k}x{k} matrix")

    per_class: dict[str, ClassMetrics] = {}
    for i in range(k):
        tp = int(cm[i, i])
        fp = int(cm[:, i].sum()) - tp
        fn = int(cm[i, :].sum()) - tp
        degenerate = False
        if tp + fp > 0:
            precision = tp / (tp + fp)
        else:
            precision, degenerate = 0.0, True
        if tp + fn > 0:
            recall = tp / (tp + fn)
        else:
            recall, degenerate = 0.0, True
        if precision + recall > 0:
            f1 = 2.0 * precision * recall / (precision + recall)
        else:
            f1, degenerate = 0.0, True
        per_class[names[i]] = ClassMetrics(precision, recall, f1, tp + fn, degenerate)

    vals = list(per_class.values())
    return MetricsReport(
        accuracy=float(np.trace(cm)) / total,
        per_class=per_class,
        macro_precision=float(np.mean([m.precision for m in vals])),
        macro_recall=float(np.mean([m.recall for m in vals])),
        macro_f1=float(np.mean([m.f1 for m in vals])),
    )


def _binary_check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if s.shape != y.shape or s.size == 0:
        raise MetricsError("scores and labels must be equal-length and non-empty")
    if not np.all((y == 0) | (y == 1)):
        raise MetricsError("labels must be binary 0/1")
    return s, y


def roc_points(scores, labels) -> tuple[np.ndarray, float]:
    """(fpr, tpr) points over descending score thresholds, and the AUC."""
    s, y = _binary_check(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("ROC needs at least one positive and one negative")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]  # tie groups end here
    tpr = np.r_[0.0, tp[last] / n_pos]
    fpr = np.r_[0.0, fp[last] / n_neg]
    auc = float(np.trapz(tpr, fpr))
    return np.stack([fpr, tpr], axis=1), auc


def pr_points(scores, labels) -> tuple[np.ndarray, float]:
    """(recall, precision) points over descending thresholds, and the AP."""
    s, y = _binary_check(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise MetricsError("PR needs at least one positive")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    tp = np.cumsum(y)
    seen = np.arange(1, len(y) + 1)
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    recall = tp[last] / n_pos
    precision = tp[last] / seen[last]
    prev_recall = np.r_[0.0, recall[:-1]]
    ap = float(np.sum((recall - prev_recall) * precision))
    points = np.stack([np.r_[0.0, recall], np.r_[1.0, precision]], axis=1)
    return points, ap


def one_vs_rest_curves(true_labels, score_matrix, class_names=None):
    """Per-class ROC-AUC and AP from an (n, K) score matrix."""
    y = np.asarray(true_labels, dtype=np.int64).reshape(-1)
    s = np.asarray(score_matrix, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != y.shape[0]:
        raise MetricsError(f"score matrix shape {s.shape} does not match labels")
    k = s.shape[1]
    names = [str(i) for i in range(k)] if class_names is None else list(class_names)
    roc_auc: dict[str, float] = {}
    ap: dict[str, float] = {}
    for i in range(k):
        binary = (y == i).astype(np.int64)
        if binary.sum() in (0, len(binary)):
            continue  # class absent (or exhaustive) in this evaluation set
        _, auc = roc_points(s[:, i], binary)
        _, avg_p = pr_points(s[:, i], binary)
        roc_auc[names[i]] = auc
        ap[names[i]] = avg_p
    return roc_auc, ap
