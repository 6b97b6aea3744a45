"""Confusion matrix, per-class/macro/micro precision-recall-F1, top-k accuracy.

All counting is integer-exact; macro averages are unweighted class means and
the 0/0 cases (a class never predicted or never present) resolve to 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


@dataclass
class MetricsReport:
    confusion: np.ndarray                       # [N, N], rows = actual, cols = predicted
    per_class: list[dict] = field(default_factory=list)
    macro: dict = field(default_factory=dict)
    micro: dict = field(default_factory=dict)
    accuracy: float = 0.0
    top_k: dict[int, float] = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return self.confusion.shape[0]

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def to_json_dict(self) -> dict:
        """Fixed-schema document: confusion_matrix, per_class, macro, micro, accuracy, top_k."""
        return {
            "confusion_matrix": self.confusion.tolist(),
            "per_class": self.per_class,
            "macro": self.macro,
            "micro": self.micro,
            "accuracy": self.accuracy,
            "top_k": {str(k): v for k, v in sorted(self.top_k.items())},
        }


def compute_metrics(preds, labels, n_classes: int) -> MetricsReport:
    """One-vs-rest counts and derived metrics from predicted/actual indices."""
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape or preds.ndim != 1 or preds.size < 1:
        raise ArgumentError(f"preds/labels must be equal-length 1-D, got {preds.shape} and {labels.shape}")
    if n_classes < 2:
        raise ArgumentError(f"need at least 2 classes, got {n_classes}")
    for name, arr in (("preds", preds), ("labels", labels)):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise ArgumentError(f"{name} contain indices outside [0, {n_classes})")

    s = preds.size
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (labels, preds), 1)

    per_class = []
    for c in range(n_classes):
        tp = int(confusion[c, c])
        fp = int(confusion[:, c].sum()) - tp
        fn = int(confusion[c, :].sum()) - tp
        tn = s - tp - fp - fn
        precision = _safe_div(tp, tp + fp)
        recall = _safe_div(tp, tp + fn)
        f1 = _safe_div(2 * precision * recall, precision + recall)
        per_class.append({"tp": tp, "fp": fp, "fn": fn, "tn": tn,
                          "precision": precision, "recall": recall, "f1": f1})

    macro = {key: sum(pc[key] for pc in per_class) / n_classes
             for key in ("precision", "recall", "f1")}
    tp_sum = sum(pc["tp"] for pc in per_class)
    fp_sum = sum(pc["fp"] for pc in per_class)
    fn_sum = sum(pc["fn"] for pc in per_class)
    micro_p = _safe_div(tp_sum, tp_sum + fp_sum)
    micro_r = _safe_div(tp_sum, tp_sum + fn_sum)
    micro = {"precision": micro_p, "recall": micro_r,
             "f1": _safe_div(2 * micro_p * micro_r, micro_p + micro_r)}
    accuracy = int(np.trace(confusion)) / s
    return MetricsReport(confusion=confusion, per_class=per_class, macro=macro,
                         micro=micro, accuracy=accuracy)


def top_k_accuracy(prob_rows, labels, k: int) -> float:
    """Fraction of samples whose label is among the k largest probabilities.

    Ties are broken toward the lower class index.
    """
    probs = np.asarray(prob_rows, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or probs.shape[0] != labels.size:
        raise ArgumentError(f"need [S, N] probabilities and S labels, got {probs.shape} and {labels.shape}")
    n = probs.shape[1]
    if not 1 <= k <= n:
        raise ArgumentError(f"k must be in [1, {n}], got {k}")
    # stable sort of -p keeps the original (lower) index first on ties
    order = np.argsort(-probs, axis=1, kind="stable")[:, :k]
    hits = (order == labels[:, None]).any(axis=1)
    return float(hits.mean())
