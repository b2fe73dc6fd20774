import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from connrisk.metrics import (
    ConfusionCounts, best_threshold, confusion, counts_at_threshold, pr_curve,
    rates, roc_curve,
)


def concordance_auc(labels, scores):
    """O(n^2) pairwise oracle: P(score+ > score-) + 0.5 P(tie)."""
    y = np.asarray(labels, dtype=bool)
    s = np.asarray(scores, dtype=float)
    pos = s[y]
    neg = s[~y]
    wins = ties = 0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1
            elif p == q:
                ties += 1
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


class TestConfusion:
    def test_all_correct(self):
        y = [True] * 4 + [False] * 6
        c = confusion(y, y)
        assert (c.tp, c.fp, c.tn, c.fn) == (4, 0, 6, 0)

    def test_all_predicted_positive(self):
        y = [True] * 4 + [False] * 6
        c = confusion(y, [True] * 10)
        assert c.fp == 6 and c.tp == 4 and c.tn == 0 and c.fn == 0

    def test_hand_fixture_by_enumeration(self):
        y = [1, 0, 1, 1, 0, 0, 1, 0, 0, 1]
        p = [1, 1, 0, 1, 0, 0, 1, 0, 1, 0]
        tp = sum(1 for a, b in zip(y, p) if a and b)
        fp = sum(1 for a, b in zip(y, p) if not a and b)
        fn = sum(1 for a, b in zip(y, p) if a and not b)
        tn = sum(1 for a, b in zip(y, p) if not a and not b)
        c = confusion(y, p)
        assert (c.tp, c.fp, c.tn, c.fn) == (tp, fp, tn, fn)
        assert c.n == 10


class TestRates:
    def test_half_recall_no_false_positives(self):
        r = rates(ConfusionCounts(tp=5, fn=5, fp=0, tn=10))
        assert r.tpr == 0.5 and r.fpr == 0.0
        assert r.g_mean == pytest.approx(math.sqrt(0.5))

    def test_perfect_classifier(self):
        r = rates(ConfusionCounts(tp=7, fn=0, fp=0, tn=13))
        assert r.g_mean == 1.0 and r.f1 == 1.0

    def test_hand_arithmetic(self):
        r = rates(ConfusionCounts(tp=3, fp=1, fn=1, tn=5))
        assert r.precision == 0.75 and r.recall == 0.75 and r.f1 == pytest.approx(0.75)

    def test_zero_division_conventions(self):
        r = rates(ConfusionCounts(tp=0, fp=0, fn=4, tn=6))
        assert r.precision == 0.0 and not r.precision_defined
        assert r.f1 == 0.0


class TestRocCurve:
    def test_perfect_scores(self):
        y = [0, 0, 1, 1, 0, 1]
        _, auc = roc_curve(y, np.asarray(y, dtype=float))
        assert auc == 1.0

    def test_constant_scores(self):
        y = [0, 1, 0, 1]
        _, auc = roc_curve(y, [0.3] * 4)
        assert auc == pytest.approx(0.5)

    def test_trapezoid_equals_concordance_oracle(self):
        rng = np.random.default_rng(0)
        y = rng.random(200) < 0.3
        y[0], y[1] = True, False
        scores = np.round(rng.random(200), 2)  # induces ties
        _, auc = roc_curve(y, scores)
        assert auc == pytest.approx(concordance_auc(y, scores), abs=1e-12)

    def test_curve_monotone_and_anchored(self):
        rng = np.random.default_rng(1)
        y = rng.random(80) < 0.4
        y[:2] = [True, False]
        s = rng.random(80)
        curve, _ = roc_curve(y, s)
        assert np.all(np.diff(curve.xs) >= 0) and np.all(np.diff(curve.ys) >= 0)
        assert (curve.xs[0], curve.ys[0]) == (0.0, 0.0)
        assert (curve.xs[-1], curve.ys[-1]) == (1.0, 1.0)
        assert np.all(np.diff(curve.thresholds) < 0)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_invariant_under_monotone_transform(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.random(60) < 0.35
        if y.all() or (~y).all():
            y[0] = True
            y[1] = False
        s = rng.normal(0, 1, 60)
        _, auc1 = roc_curve(y, s)
        _, auc2 = roc_curve(y, np.exp(2.0 * s) + 7.0)
        assert auc1 == pytest.approx(auc2, abs=1e-12)


class TestPrCurve:
    def test_perfect_scores(self):
        y = [0, 1, 0, 1]
        _, auc = pr_curve(y, [0.1, 0.9, 0.2, 0.8])
        assert auc == 1.0

    def test_constant_scores_give_prevalence(self):
        y = [1, 0, 0, 0, 1, 0, 0, 0, 0, 0]
        _, auc = pr_curve(y, [0.5] * 10)
        assert auc == pytest.approx(0.2)

    def test_against_per_threshold_recomputation(self):
        rng = np.random.default_rng(3)
        y = rng.random(120) < 0.3
        y[:2] = [True, False]
        s = np.round(rng.random(120), 2)
        curve, auc = pr_curve(y, s)
        # brute force: recompute precision/recall at every distinct threshold
        expect_auc = 0.0
        prev_recall = 0.0
        for threshold in sorted(set(s), reverse=True):
            c = counts_at_threshold(y, s, threshold)
            precision = c.tp / (c.tp + c.fp)
            recall = c.tp / (c.tp + c.fn)
            expect_auc += (recall - prev_recall) * precision
            prev_recall = recall
        assert auc == pytest.approx(expect_auc, abs=1e-12)
        for x, yv, t in curve.rows():
            c = counts_at_threshold(y, s, t)
            assert yv == pytest.approx(c.tp / (c.tp + c.fp))
            assert x == pytest.approx(c.tp / (c.tp + c.fn))


class TestBestThreshold:
    def test_separable_data_scores_one(self):
        y = [0, 0, 0, 1, 1]
        s = [0.1, 0.2, 0.3, 0.8, 0.9]
        for objective in ("g_mean", "f1"):
            _, value = best_threshold(y, s, objective)
            assert value == 1.0

    def test_exhaustive_sweep_fixture(self):
        rng = np.random.default_rng(9)
        y = rng.random(150) < 0.25
        y[:2] = [True, False]
        s = np.round(rng.random(150), 2)
        threshold, value = best_threshold(y, s, "f1")
        best = (-1.0, None)
        for t in sorted(set(s)):
            r = rates(counts_at_threshold(y, s, t))
            if r.f1 > best[0]:
                best = (r.f1, t)
        assert value == pytest.approx(best[0])
        assert threshold == best[1]

    def test_tie_resolves_to_smaller_threshold(self):
        # two thresholds yield the identical confusion matrix
        y = [False, True, True]
        s = [0.1, 0.7, 0.9]
        threshold, value = best_threshold(y, s, "g_mean")
        assert value == 1.0
        assert threshold == 0.7  # 0.9 achieves g_mean < 1, 0.7 is the unique max
        # explicit tie: duplicate scores collapse; craft equal-value candidates
        y2 = [False, True]
        s2 = [0.2, 0.8]
        t2, v2 = best_threshold(y2, s2, "g_mean")
        assert (t2, v2) == (0.8, 1.0)

    def test_single_threshold_curve(self):
        y = [False, True]
        s = [0.5, 0.5]
        threshold, _ = best_threshold(y, s, "g_mean")
        assert threshold == 0.5

    def test_unknown_objective(self):
        with pytest.raises(ValueError):
            best_threshold([0, 1], [0.1, 0.9], "accuracy")


def test_gmean_bounds_property():
    rng = np.random.default_rng(12)
    for _ in range(50):
        tp, fp, tn, fn = rng.integers(0, 30, 4)
        if tp + fn == 0 or fp + tn == 0:
            continue
        r = rates(ConfusionCounts(tp=int(tp), fp=int(fp), tn=int(tn), fn=int(fn)))
        assert 0.0 <= r.g_mean <= 1.0
        if r.g_mean == 1.0:
            assert fn == 0 and fp == 0
