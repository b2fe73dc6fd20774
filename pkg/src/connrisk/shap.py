"""Exact SHAP attributions for tree ensembles, plus a brute-force oracle.

The fast path implements path-dependent TreeSHAP: feature attributions for
the conditional-expectation game where, walking a tree, a feature outside
the coalition S splits the flow between children in proportion to their
training cover, while features in S follow the explained row. The recursion
tracks, per unique feature on the current path, the fraction of permutation
weight flowing when that feature is in/out of the coalition, which yields
exact Shapley values in O(leaves * depth^2) per tree instead of 2^features.

``brute_force_shap`` evaluates the same game by enumerating every coalition
and applying the Shapley formula directly; it is exponential and exists to
verify the fast path on small fixtures.

Attributions are reported in margin (log-odds) space: for every row,
base_value + sum(phi) reproduces the ensemble margin to within float noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from .gbdt import Tree, TreeEnsemble

try:
    from numba import njit, prange
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

    prange = range


class MissingCoverError(RuntimeError):
    """Raised when a tree lacks the training cover counts SHAP needs."""


@dataclass(frozen=True)
class ShapExplanation:
    """Additive attribution of one prediction in margin space."""

    base_value: float
    values: np.ndarray
    margin: float
    feature_names: tuple[str, ...]

    @property
    def local_accuracy_gap(self) -> float:
        return abs(self.base_value + float(self.values.sum()) - self.margin)

    def to_dict(self) -> dict:
        return {
            "base_value": self.base_value,
            "margin": self.margin,
            "values": {name: float(v) for name, v in zip(self.feature_names, self.values)},
        }


@njit(cache=True)
def _shap_one_tree(x, feat, thr, missl, left, right, value, cover, path_cap, phi):
    """Accumulate one tree's attributions for one row into phi.

    Depth-first walk with an explicit frame stack; every frame owns a copy
    of the unique-feature path (feature id, zero fraction, one fraction,
    permutation weight per entry). Entry 0 is the root placeholder.
    """
    cap = path_cap + 2
    s_node = np.empty(cap, np.int64)
    s_plen = np.empty(cap, np.int64)
    s_pz = np.empty(cap, np.float64)
    s_po = np.empty(cap, np.float64)
    s_pi = np.empty(cap, np.int64)
    s_d = np.empty((cap, path_cap), np.int64)
    s_z = np.empty((cap, path_cap), np.float64)
    s_o = np.empty((cap, path_cap), np.float64)
    s_w = np.empty((cap, path_cap), np.float64)

    s_node[0] = 0
    s_plen[0] = 0
    s_pz[0] = 1.0
    s_po[0] = 1.0
    s_pi[0] = -1
    top = 1
    while top > 0:
        top -= 1
        t = top
        node = s_node[t]
        plen = s_plen[t]
        pz = s_pz[t]
        po = s_po[t]
        pi = s_pi[t]
        d = s_d[t]
        z = s_z[t]
        o = s_o[t]
        w = s_w[t]

        # extend the path with the split that led here
        d[plen] = pi
        z[plen] = pz
        o[plen] = po
        w[plen] = 1.0 if plen == 0 else 0.0
        for i in range(plen - 1, -1, -1):
            w[i + 1] += po * w[i] * (i + 1) / (plen + 1)
            w[i] = pz * w[i] * (plen - i) / (plen + 1)
        plen += 1

        f = feat[node]
        if f < 0:
            leaf_v = value[node]
            for i0 in range(1, plen):
                oi = o[i0]
                zi = z[i0]
                # sum of path weights with entry i0 unwound
                total = 0.0
                n_ = w[plen - 1]
                if oi != 0.0:
                    for j in range(plen - 2, -1, -1):
                        tmp = n_ * plen / ((j + 1) * oi)
                        total += tmp
                        n_ = w[j] - tmp * zi * (plen - 1 - j) / plen
                else:
                    for j in range(plen - 2, -1, -1):
                        total += w[j] * plen / (zi * (plen - 1 - j))
                phi[d[i0]] += total * (oi - zi) * leaf_v
        else:
            xv = x[f]
            if xv != xv:  # NaN routes down the default direction
                go_left = missl[node]
            else:
                go_left = xv < thr[node]
            if go_left:
                hot = left[node]
                cold = right[node]
            else:
                hot = right[node]
                cold = left[node]

            iz = 1.0
            io = 1.0
            k = -1
            for i0 in range(1, plen):
                if d[i0] == f:
                    k = i0
                    break
            if k >= 0:
                # same feature already on the path: merge by unwinding it
                iz = z[k]
                io = o[k]
                n_ = w[plen - 1]
                for j in range(plen - 2, -1, -1):
                    if io != 0.0:
                        tv = w[j]
                        w[j] = n_ * plen / ((j + 1) * io)
                        n_ = tv - w[j] * iz * (plen - 1 - j) / plen
                    else:
                        w[j] = w[j] * plen / (iz * (plen - 1 - j))
                for j in range(k, plen - 1):
                    d[j] = d[j + 1]
                    z[j] = z[j + 1]
                    o[j] = o[j + 1]
                plen -= 1

            tc = t + 1
            s_node[tc] = cold
            s_plen[tc] = plen
            s_pz[tc] = iz * cover[cold] / cover[node]
            s_po[tc] = 0.0
            s_pi[tc] = f
            for j in range(plen):
                s_d[tc, j] = d[j]
                s_z[tc, j] = z[j]
                s_o[tc, j] = o[j]
                s_w[tc, j] = w[j]

            s_node[t] = hot
            s_plen[t] = plen
            s_pz[t] = iz * cover[hot] / cover[node]
            s_po[t] = io
            s_pi[t] = f
            top = t + 2


@njit(cache=True, parallel=True)
def _shap_matrix(X, feat, thr, missl, left, right, value, cover, offsets, path_cap, out):
    for r in prange(X.shape[0]):
        for t in range(offsets.shape[0] - 1):
            a = offsets[t]
            b = offsets[t + 1]
            _shap_one_tree(X[r], feat[a:b], thr[a:b], missl[a:b], left[a:b], right[a:b],
                           value[a:b], cover[a:b], path_cap, out[r])


def _check_covers(ensemble: TreeEnsemble):
    for tree in ensemble.trees:
        if tree.cover.size == 0 or not np.all(tree.cover > 0):
            raise MissingCoverError(
                "tree lacks positive cover statistics; retrain with covers "
                "(or populate them from a background sample) before explaining")


def _flatten(ensemble: TreeEnsemble):
    """Concatenate tree node arrays; leaf values are pre-scaled by the learning rate."""
    feat = np.concatenate([t.feature.astype(np.int64) for t in ensemble.trees])
    thr = np.concatenate([t.threshold for t in ensemble.trees])
    missl = np.concatenate([t.missing_left for t in ensemble.trees])
    left = np.concatenate([t.left.astype(np.int64) for t in ensemble.trees])
    right = np.concatenate([t.right.astype(np.int64) for t in ensemble.trees])
    value = np.concatenate([t.value * ensemble.learning_rate for t in ensemble.trees])
    cover = np.concatenate([t.cover for t in ensemble.trees])
    sizes = [t.n_nodes for t in ensemble.trees]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    path_cap = max(t.max_depth() for t in ensemble.trees) + 2
    return feat, thr, missl, left, right, value, cover, offsets, path_cap


def expected_value(tree: Tree, scale: float = 1.0) -> float:
    """Cover-weighted expectation of a tree (the empty-coalition value)."""

    def rec(node: int) -> float:
        if tree.is_leaf(node):
            return float(tree.value[node])
        l, r = int(tree.left[node]), int(tree.right[node])
        return (tree.cover[l] * rec(l) + tree.cover[r] * rec(r)) / tree.cover[node]

    return scale * rec(0)


def ensemble_base_value(ensemble: TreeEnsemble) -> float:
    return ensemble.base_score + sum(
        expected_value(t, ensemble.learning_rate) for t in ensemble.trees)


def shap_values(ensemble: TreeEnsemble, X) -> tuple[np.ndarray, float]:
    """Attribution matrix (rows x features) and the shared base value."""
    _check_covers(ensemble)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != ensemble.n_features:
        raise ValueError(
            f"feature count mismatch: model expects {ensemble.n_features}, got {X.shape[1]}")
    out = np.zeros((X.shape[0], ensemble.n_features), dtype=float)
    if ensemble.trees:
        feat, thr, missl, left, right, value, cover, offsets, path_cap = _flatten(ensemble)
        _shap_matrix(X, feat, thr, missl, left, right, value, cover, offsets, path_cap, out)
    return out, ensemble_base_value(ensemble)


def tree_shap(ensemble: TreeEnsemble, row) -> ShapExplanation:
    """Explain a single prediction."""
    row = np.asarray(row, dtype=float)
    phi, base = shap_values(ensemble, row[None, :])
    margin = float(ensemble.predict_margin(row[None, :])[0])
    return ShapExplanation(base_value=base, values=phi[0], margin=margin,
                           feature_names=ensemble.feature_names)


def populate_covers(tree: Tree, rows) -> Tree:
    """Return a copy of the tree with covers counted from a background sample."""
    X = np.atleast_2d(np.asarray(rows, dtype=float))
    cover = np.zeros(tree.n_nodes, dtype=float)

    def route(node: int, mask: np.ndarray):
        cover[node] = float(mask.sum())
        if tree.is_leaf(node):
            return
        v = X[mask, tree.feature[node]]
        go_left = np.where(np.isnan(v), tree.missing_left[node], v < tree.threshold[node])
        idx = np.flatnonzero(mask)
        left_mask = np.zeros_like(mask)
        left_mask[idx[go_left]] = True
        route(int(tree.left[node]), left_mask)
        route(int(tree.right[node]), mask & ~left_mask)

    route(0, np.ones(X.shape[0], dtype=bool))
    return Tree(feature=tree.feature, threshold=tree.threshold,
                missing_left=tree.missing_left, left=tree.left, right=tree.right,
                value=tree.value, cover=cover)


def _coalition_value(tree: Tree, x: np.ndarray, subset_mask: int) -> float:
    """Expected tree output with coalition features fixed to x's values."""

    def rec(node: int) -> float:
        if tree.is_leaf(node):
            return float(tree.value[node])
        f = int(tree.feature[node])
        l, r = int(tree.left[node]), int(tree.right[node])
        if (subset_mask >> f) & 1:
            v = x[f]
            go_left = tree.missing_left[node] if math.isnan(v) else v < tree.threshold[node]
            return rec(l if go_left else r)
        return (tree.cover[l] * rec(l) + tree.cover[r] * rec(r)) / tree.cover[node]

    return rec(0)


def brute_force_shap(tree: Tree, row, n_features: int,
                     background=None, scale: float = 1.0) -> np.ndarray:
    """Exponential Shapley oracle over all feature coalitions of one tree.

    Uses the same cover-weighted conditional expectation as the fast path,
    so the two must agree to float precision. Guarded to <= 16 features.
    """
    if n_features > 16:
        raise ValueError("brute-force oracle is exponential; use <= 16 features")
    if background is not None:
        tree = populate_covers(tree, background)
    if not np.all(tree.cover > 0):
        raise MissingCoverError(
            "tree lacks positive cover statistics; provide a background sample")
    x = np.asarray(row, dtype=float)
    n_subsets = 1 << n_features
    values = np.empty(n_subsets, dtype=float)
    for mask in range(n_subsets):
        values[mask] = _coalition_value(tree, x, mask)

    fact = [math.factorial(i) for i in range(n_features + 1)]
    phi = np.zeros(n_features, dtype=float)
    for j in range(n_features):
        bit = 1 << j
        for mask in range(n_subsets):
            if mask & bit:
                continue
            s = bin(mask).count("1")
            weight = fact[s] * fact[n_features - s - 1] / fact[n_features]
            phi[j] += weight * (values[mask | bit] - values[mask])
    return phi * scale


@dataclass(frozen=True)
class ShapSummary:
    """Per-feature attribution clouds over a sample of rows.

    ``feature_values`` holds the model-space inputs the attributions refer
    to; importance is the mean absolute attribution and ``rank`` is 1-based
    with 1 = most important.
    """

    feature_names: tuple[str, ...]
    shap_matrix: np.ndarray
    feature_values: np.ndarray
    base_value: float
    row_ids: np.ndarray
    importance: np.ndarray
    rank: np.ndarray

    def ranking(self) -> list[tuple[str, float, int]]:
        order = np.argsort(self.rank)
        return [(self.feature_names[i], float(self.importance[i]), int(self.rank[i]))
                for i in order]

    def to_csv_rows(self):
        rows = []
        for j, name in enumerate(self.feature_names):
            for i in range(self.shap_matrix.shape[0]):
                rows.append((name, int(self.row_ids[i]),
                             float(self.shap_matrix[i, j]),
                             float(self.feature_values[i, j]),
                             int(self.rank[j])))
        return rows


def summarize(ensemble: TreeEnsemble, X, row_ids=None) -> ShapSummary:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if row_ids is None:
        row_ids = np.arange(X.shape[0], dtype=np.int64)
    phi, base = shap_values(ensemble, X)
    importance = np.abs(phi).mean(axis=0)
    # rank 1 = largest mean |phi|; ties keep feature order for stability
    order = np.argsort(-importance, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(1, len(order) + 1)
    return ShapSummary(
        feature_names=ensemble.feature_names,
        shap_matrix=phi,
        feature_values=X,
        base_value=base,
        row_ids=np.asarray(row_ids, dtype=np.int64),
        importance=importance,
        rank=rank,
    )
