"""Evaluation metrics for imbalanced binary classification.

All functions are pure; scores are "higher means more likely positive" and
a row is predicted positive when ``score >= threshold``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass(frozen=True)
class Rates:
    """Derived rates with explicit 0/0 conventions.

    ``precision`` is 0 with ``precision_defined=False`` when nothing is
    predicted positive; ``g_mean`` is computed directly from
    tpr * (1 - fpr), and ``f1`` is 0 when there are no true positives.
    """

    tpr: float
    fpr: float
    precision: float
    recall: float
    g_mean: float
    f1: float
    precision_defined: bool = True

    def to_dict(self) -> dict:
        return {
            "tpr": self.tpr, "fpr": self.fpr, "precision": self.precision,
            "recall": self.recall, "g_mean": self.g_mean, "f1": self.f1,
            "precision_defined": self.precision_defined,
        }


def confusion(labels, predictions) -> ConfusionCounts:
    """Count the four confusion cells; inputs are boolean-like arrays."""
    y = np.asarray(labels, dtype=bool)
    p = np.asarray(predictions, dtype=bool)
    if y.shape != p.shape:
        raise ValueError("labels and predictions must have the same length")
    tp = int(np.sum(p & y))
    fp = int(np.sum(p & ~y))
    fn = int(np.sum(~p & y))
    tn = int(np.sum(~p & ~y))
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def rates(counts: ConfusionCounts) -> Rates:
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    tpr = tp / (tp + fn) if tp + fn > 0 else 0.0
    fpr = fp / (fp + tn) if fp + tn > 0 else 0.0
    precision_defined = tp + fp > 0
    precision = tp / (tp + fp) if precision_defined else 0.0
    recall = tpr
    g_mean = math.sqrt(tpr * (1.0 - fpr))
    f1 = 2.0 * precision * recall / (precision + recall) if tp > 0 else 0.0
    return Rates(tpr=tpr, fpr=fpr, precision=precision, recall=recall,
                 g_mean=g_mean, f1=f1, precision_defined=precision_defined)


@dataclass(frozen=True)
class Curve:
    """An operating curve: ordered (x, y) points with their thresholds.

    kind="roc": x=FPR, y=TPR.  kind="pr": x=recall, y=precision.
    Thresholds are strictly decreasing along the sweep (score ties collapse
    into one point).
    """

    kind: str
    xs: np.ndarray
    ys: np.ndarray
    thresholds: np.ndarray

    def rows(self):
        return zip(self.xs.tolist(), self.ys.tolist(), self.thresholds.tolist())


def _sweep_counts(labels, scores):
    """Cumulative TP/FP over the descending sweep of distinct score thresholds."""
    y = np.asarray(labels, dtype=bool)
    s = np.asarray(scores, dtype=float)
    if y.shape != s.shape:
        raise ValueError("labels and scores must have the same length")
    if y.size == 0:
        raise ValueError("empty input")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # indices where the threshold changes (last occurrence of each distinct score)
    distinct = np.flatnonzero(np.diff(s_sorted)) if s_sorted.size > 1 else np.array([], dtype=int)
    idx = np.r_[distinct, s_sorted.size - 1]
    tp = np.cumsum(y_sorted)[idx].astype(float)
    fp = np.cumsum(~y_sorted)[idx].astype(float)
    thresholds = s_sorted[idx]
    n_pos = float(y.sum())
    n_neg = float((~y).sum())
    return tp, fp, thresholds, n_pos, n_neg


def roc_curve(labels, scores) -> tuple[Curve, float]:
    """ROC curve over distinct thresholds and its trapezoidal AUC.

    The curve is anchored at (0, 0) with threshold +inf and ends at (1, 1)
    at the lowest score.
    """
    tp, fp, thresholds, n_pos, n_neg = _sweep_counts(labels, scores)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC requires both classes present")
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thr = np.r_[np.inf, thresholds]
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    auc = float(trapezoid(tpr, fpr))
    return Curve(kind="roc", xs=fpr, ys=tpr, thresholds=thr), auc


def pr_curve(labels, scores) -> tuple[Curve, float]:
    """Precision-recall curve and its step-interpolated AUC.

    The AUC holds precision constant to the right of each recall point:
    sum over points of (R_i - R_{i-1}) * P_i with R_0 = 0. This matches the
    average-precision convention and avoids the optimistic linear
    interpolation in PR space.
    """
    tp, fp, thresholds, n_pos, _ = _sweep_counts(labels, scores)
    if n_pos == 0:
        raise ValueError("PR requires at least one positive")
    recall = tp / n_pos
    predicted = tp + fp
    precision = tp / predicted
    auc = float(np.sum(np.diff(np.r_[0.0, recall]) * precision))
    return Curve(kind="pr", xs=recall, ys=precision, thresholds=thresholds), auc


def best_threshold(labels, scores, objective: str = "g_mean") -> tuple[float, float]:
    """Threshold (over distinct scores) maximising g_mean or f1.

    Ties are resolved toward the smaller threshold.
    """
    if objective not in ("g_mean", "f1"):
        raise ValueError(f"unknown objective {objective!r}")
    tp, fp, thresholds, n_pos, n_neg = _sweep_counts(labels, scores)
    fn = n_pos - tp
    tn = n_neg - fp
    tpr = np.divide(tp, n_pos, out=np.zeros_like(tp), where=n_pos > 0)
    fpr = np.divide(fp, n_neg, out=np.zeros_like(fp), where=n_neg > 0)
    if objective == "g_mean":
        values = np.sqrt(tpr * (1.0 - fpr))
    else:
        predicted = tp + fp
        precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
        denom = precision + tpr
        values = np.divide(2 * precision * tpr, denom, out=np.zeros_like(tp), where=tp > 0)
    # sweep yields thresholds in descending order; scan ascending so that on
    # ties the smaller threshold wins
    best_i = None
    best_v = -1.0
    for i in range(len(thresholds) - 1, -1, -1):
        if values[i] > best_v:
            best_v = float(values[i])
            best_i = i
    return float(thresholds[best_i]), best_v


def counts_at_threshold(labels, scores, threshold: float) -> ConfusionCounts:
    """Confusion counts for the rule score >= threshold."""
    s = np.asarray(scores, dtype=float)
    return confusion(labels, s >= threshold)


def curve_to_csv_rows(curve: Curve) -> list[tuple[float, float, float]]:
    return [(float(x), float(y), float(t)) for x, y, t in curve.rows()]
