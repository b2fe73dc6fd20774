"""Minimum-connection-time style threshold baselines.

The baseline classifier flags a connection as missed when its connection
time (scheduled, perceived or actual, depending on the stage) is strictly
below a threshold. Thresholds sweep 0..500 minutes in 10-minute steps; the
fixed 60-minute hub rule is always reported alongside the sweep optimum.
Negative perceived/actual times fall below every candidate threshold and
are therefore always flagged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import DsmStage, stage_time_feature
from .metrics import ConfusionCounts, Curve, Rates, confusion, pr_curve, rates, roc_curve

SWEEP_THRESHOLDS = tuple(range(0, 501, 10))
MCT_MINUTES = 60


@dataclass(frozen=True)
class ThresholdRow:
    threshold: int
    counts: ConfusionCounts
    rates: Rates

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, **self.counts.to_dict(), **self.rates.to_dict()}


@dataclass(frozen=True)
class ThresholdBaseline:
    """Sweep report for one time feature on one evaluation split."""

    time_feature: str
    rows: tuple[ThresholdRow, ...]
    mct_row: ThresholdRow
    best_g_mean: tuple[int, float]
    best_f1: tuple[int, float]
    roc: Curve
    auc_roc: float
    pr: Curve
    auc_pr: float

    def to_dict(self) -> dict:
        return {
            "time_feature": self.time_feature,
            "sweep": [r.to_dict() for r in self.rows],
            "mct_row": self.mct_row.to_dict(),
            "best_g_mean": {"threshold": self.best_g_mean[0], "value": self.best_g_mean[1]},
            "best_f1": {"threshold": self.best_f1[0], "value": self.best_f1[1]},
            "auc_roc": self.auc_roc,
            "auc_pr": self.auc_pr,
        }


def threshold_counts(times, labels, threshold: float) -> ConfusionCounts:
    """Confusion counts for the rule time < threshold => predicted missed."""
    t = np.asarray(times, dtype=float)
    return confusion(labels, t < threshold)


def evaluate_baseline(times, labels, time_feature: str) -> ThresholdBaseline:
    """Run the 0..500 sweep and assemble the baseline report.

    The ROC/PR curves and AUCs treat the negated connection time as the
    score, which is the same classifier family evaluated at every possible
    threshold; the sweep rows are limited to the 51 canonical candidates.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if t.shape != y.shape:
        raise ValueError("times and labels must have the same length")

    rows = []
    for threshold in SWEEP_THRESHOLDS:
        counts = threshold_counts(t, y, threshold)
        rows.append(ThresholdRow(threshold=threshold, counts=counts, rates=rates(counts)))

    mct_row = next(r for r in rows if r.threshold == MCT_MINUTES)

    best_g: tuple[int, float] | None = None
    best_f: tuple[int, float] | None = None
    for row in rows:  # ascending thresholds: ties keep the smaller one
        if best_g is None or row.rates.g_mean > best_g[1]:
            best_g = (row.threshold, row.rates.g_mean)
        if best_f is None or row.rates.f1 > best_f[1]:
            best_f = (row.threshold, row.rates.f1)

    score = -t
    roc, auc_roc = roc_curve(y, score)
    pr, auc_pr = pr_curve(y, score)
    return ThresholdBaseline(
        time_feature=time_feature, rows=tuple(rows), mct_row=mct_row,
        best_g_mean=best_g, best_f1=best_f,
        roc=roc, auc_roc=auc_roc, pr=pr, auc_pr=auc_pr,
    )


def baseline_time_feature(stage: DsmStage) -> str:
    """Connection-time feature the baseline uses for a stage."""
    return stage_time_feature(stage)


def sweep_csv_rows(report: ThresholdBaseline) -> list[dict]:
    return [r.to_dict() for r in report.rows]
