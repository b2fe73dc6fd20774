"""Second-order gradient-boosted regression trees with logistic loss.

Trees are grown depth-wise and greedily. For a candidate partition with
gradient/hessian sums (G_L, H_L) and (G_R, H_R), the split gain is

    1/2 * [ G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - (G_L+G_R)^2/(H_L+H_R+lam) ]

and a leaf's weight is -G/(H+lam), in log-odds units. Two split finders are
available: a histogram mode (binned features, scales to millions of rows)
and an exact mode that enumerates every distinct-value boundary, kept around
so small fixtures can be checked against brute-force enumeration.

Missing values: a NaN feature is routed down a per-node default direction,
learned during training as the gain-maximizing side (training rows with NaN
land in a dedicated histogram bucket / side group).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

MODEL_FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class BoostConfig:
    n_rounds: int = 200
    learning_rate: float = 0.4
    max_depth: int = 15
    l2_leaf_reg: float = 1.0
    min_child_hessian: float = 1.0
    n_bins: int = 256
    tree_method: str = "hist"  # "hist" | "exact"
    base_score: Optional[float] = None  # None -> logit of training positive rate
    seed: int = 0  # recorded for reproducibility; growth itself is deterministic

    def __post_init__(self):
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.l2_leaf_reg < 0:
            raise ValueError("l2_leaf_reg must be >= 0")
        if self.min_child_hessian < 0:
            raise ValueError("min_child_hessian must be >= 0")
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        if self.tree_method not in ("hist", "exact"):
            raise ValueError(f"unknown tree_method {self.tree_method!r}")


@dataclass
class Tree:
    """One regression tree as parallel node arrays.

    ``feature[i] == -1`` marks a leaf; ``value`` holds leaf weights (0 for
    internal nodes) and ``cover`` the number of training rows that reached
    each node, which TreeSHAP uses as the background distribution.
    """

    feature: np.ndarray
    threshold: np.ndarray
    missing_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def max_depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        out = 0
        for i in range(self.n_nodes):  # children always follow parents
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
                out = max(out, depth[i] + 1)
        return out

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = np.flatnonzero(feat >= 0)
            if active.size == 0:
                break
            f = feat[active]
            v = X[active, f]
            cur = node[active]
            nan = np.isnan(v)
            go_left = np.where(nan, self.missing_left[cur], v < self.threshold[cur])
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]


@dataclass
class TreeEnsemble:
    """Additive tree model: margin(x) = base_score + lr * sum_t tree_t(x)."""

    base_score: float
    learning_rate: float
    trees: list[Tree]
    feature_names: tuple[str, ...]
    config: Optional[BoostConfig] = None
    train_loss_history: tuple[float, ...] = ()

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict_margin(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"feature count mismatch: model expects {self.n_features}, got {X.shape[1]}")
        margin = np.full(X.shape[0], self.base_score, dtype=float)
        for tree in self.trees:
            margin += self.learning_rate * tree.predict_value(X)
        return margin

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.predict_margin(X))


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def logistic_grad_hess(label, margin):
    """Per-row gradient and hessian of the logistic loss at a margin.

    g = p - y and h = p (1 - p) with p = sigmoid(margin).
    """
    p = sigmoid(np.asarray(margin, dtype=float))
    y = np.asarray(label, dtype=float)
    g = p - y
    h = p * (1.0 - p)
    return g, h


def log_loss(labels, margins) -> float:
    """Mean logistic loss, numerically stable for large |margin|."""
    y = np.asarray(labels, dtype=float)
    m = np.asarray(margins, dtype=float)
    softplus = np.maximum(m, 0.0) + np.log1p(np.exp(-np.abs(m)))
    return float(np.mean(softplus - y * m))


def _split_gain(gl, hl, gr, hr, lam):
    parent_g = gl + gr
    parent_h = hl + hr
    return 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam)
                  - parent_g * parent_g / (parent_h + lam))


def _bin_features(X: np.ndarray, n_bins: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """Quantile-bin each feature; code 0 is the missing bucket.

    When a feature has at most ``n_bins`` distinct values the edges fall at
    midpoints between consecutive distinct values, making histogram splits
    identical to exact ones on small data.
    """
    n, f = X.shape
    codes = np.zeros((n, f), dtype=np.uint16)
    edges_per_feature: list[np.ndarray] = []
    for j in range(f):
        col = X[:, j]
        finite = col[~np.isnan(col)]
        uniq = np.unique(finite)
        if uniq.size <= 1:
            edges = np.empty(0, dtype=float)
        elif uniq.size <= n_bins:
            edges = (uniq[:-1] + uniq[1:]) / 2.0
        else:
            qs = np.quantile(finite, np.linspace(0.0, 1.0, n_bins + 1)[1:-1])
            edges = np.unique(qs)
        edges_per_feature.append(edges)
        code = np.searchsorted(edges, col, side="right") + 1
        code[np.isnan(col)] = 0
        codes[:, j] = code.astype(np.uint16)
    return codes, edges_per_feature


class _TreeBuilder:
    """Accumulates node arrays while a tree is grown breadth-first."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.missing_left: list[bool] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.cover: list[float] = []

    def add_node(self, cover: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.missing_left.append(True)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.cover.append(cover)
        return len(self.feature) - 1

    def set_split(self, node: int, feature: int, threshold: float, missing_left: bool,
                  left: int, right: int):
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.missing_left[node] = missing_left
        self.left[node] = left
        self.right[node] = right

    def set_leaf(self, node: int, weight: float):
        self.value[node] = weight

    def build(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=float),
            missing_left=np.asarray(self.missing_left, dtype=bool),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=float),
            cover=np.asarray(self.cover, dtype=float),
        )


def _grow_tree_hist(codes, edges, g, h, config: BoostConfig) -> tuple[Tree, np.ndarray]:
    """Histogram-based depth-wise growth.

    Returns the tree and the leaf value assigned to every training row.
    """
    n, n_features = codes.shape
    lam = config.l2_leaf_reg
    min_h = config.min_child_hessian
    B = config.n_bins + 1  # bucket 0 is the missing bucket

    builder = _TreeBuilder()
    root = builder.add_node(cover=float(n))
    row_value = np.zeros(n, dtype=float)

    idx = np.arange(n, dtype=np.int64)   # active row indices
    rank = np.zeros(n, dtype=np.int64)   # frontier rank per active row
    frontier = [root]

    def finalize_leaf(node: int, rows: np.ndarray, g_sum: float, h_sum: float):
        weight = -g_sum / (h_sum + lam)
        builder.set_leaf(node, weight)
        row_value[rows] = weight

    for _depth in range(config.max_depth):
        if not frontier:
            break
        nf = len(frontier)
        g_tot = np.bincount(rank, weights=g[idx], minlength=nf)
        h_tot = np.bincount(rank, weights=h[idx], minlength=nf)
        c_tot = np.bincount(rank, minlength=nf).astype(float)

        best_gain = np.full(nf, -np.inf)
        best_feature = np.full(nf, -1, dtype=np.int64)
        best_cut = np.zeros(nf, dtype=np.int64)      # split: codes <= cut+1 go left
        best_missing_left = np.zeros(nf, dtype=bool)

        for f in range(n_features):
            n_cuts = len(edges[f])
            if n_cuts == 0:
                continue
            key = rank * B + codes[idx, f]
            hg = np.bincount(key, weights=g[idx], minlength=nf * B).reshape(nf, B)
            hh = np.bincount(key, weights=h[idx], minlength=nf * B).reshape(nf, B)
            hc = np.bincount(key, minlength=nf * B).reshape(nf, B).astype(float)

            cg = np.cumsum(hg[:, 1:1 + n_cuts + 1], axis=1)[:, :n_cuts]
            ch = np.cumsum(hh[:, 1:1 + n_cuts + 1], axis=1)[:, :n_cuts]
            cc = np.cumsum(hc[:, 1:1 + n_cuts + 1], axis=1)[:, :n_cuts]
            g_miss, h_miss, c_miss = hg[:, 0:1], hh[:, 0:1], hc[:, 0:1]

            gains = np.full((nf, n_cuts, 2), -np.inf)
            for d, add_missing in ((0, True), (1, False)):  # missing-left first
                gl = cg + (g_miss if add_missing else 0.0)
                hl = ch + (h_miss if add_missing else 0.0)
                cl = cc + (c_miss if add_missing else 0.0)
                gr = g_tot[:, None] - gl
                hr = h_tot[:, None] - hl
                cr = c_tot[:, None] - cl
                valid = (hl >= min_h) & (hr >= min_h) & (cl >= 1) & (cr >= 1)
                gain = _split_gain(gl, hl, gr, hr, lam)
                gains[:, :, d] = np.where(valid, gain, -np.inf)

            flat = gains.reshape(nf, n_cuts * 2)
            arg = np.argmax(flat, axis=1)
            gain_f = flat[np.arange(nf), arg]
            improved = gain_f > best_gain  # strict: earlier feature wins ties
            best_gain[improved] = gain_f[improved]
            best_feature[improved] = f
            best_cut[improved] = arg[improved] // 2
            best_missing_left[improved] = (arg[improved] % 2) == 0

        splits = best_gain > 0.0
        for r in np.flatnonzero(~splits):
            node = frontier[r]
            finalize_leaf(node, idx[rank == r], g_tot[r], h_tot[r])
        if not splits.any():
            frontier = []
            break

        # create children for splitting nodes
        new_frontier: list[int] = []
        child_base = np.full(nf, -1, dtype=np.int64)
        for r in np.flatnonzero(splits):
            node = frontier[r]
            f = int(best_feature[r])
            threshold = float(edges[f][best_cut[r]])
            left = builder.add_node(cover=0.0)
            right = builder.add_node(cover=0.0)
            builder.set_split(node, f, threshold, bool(best_missing_left[r]), left, right)
            child_base[r] = len(new_frontier)
            new_frontier.extend([left, right])

        # route active rows of splitting nodes
        keep = splits[rank]
        idx = idx[keep]
        rank_kept = rank[keep]
        col = codes[idx, best_feature[rank_kept]]
        cut_code = best_cut[rank_kept] + 1
        go_left = np.where(col == 0, best_missing_left[rank_kept], col <= cut_code)
        rank = child_base[rank_kept] + np.where(go_left, 0, 1)

        # record child covers
        if new_frontier:
            counts = np.bincount(rank, minlength=len(new_frontier)).astype(float)
            for r, node in enumerate(new_frontier):
                builder.cover[node] = counts[r]
        frontier = new_frontier

    # whatever survives max_depth becomes leaves
    if frontier:
        nf = len(frontier)
        g_tot = np.bincount(rank, weights=g[idx], minlength=nf)
        h_tot = np.bincount(rank, weights=h[idx], minlength=nf)
        for r, node in enumerate(frontier):
            rows_r = idx[rank == r]
            finalize_leaf(node, rows_r, g_tot[r], h_tot[r])

    return builder.build(), row_value


def _grow_tree_exact(X, g, h, config: BoostConfig) -> tuple[Tree, np.ndarray]:
    """Exact greedy growth enumerating all distinct-value boundaries.

    Candidate order (feature ascending, threshold ascending, missing-left
    before missing-right) with strict improvement makes tie-breaking
    deterministic and matchable by a brute-force oracle.
    """
    n, n_features = X.shape
    lam = config.l2_leaf_reg
    min_h = config.min_child_hessian
    builder = _TreeBuilder()
    row_value = np.zeros(n, dtype=float)

    def grow(rows: np.ndarray, depth: int) -> int:
        node = builder.add_node(cover=float(rows.size))
        g_sum = float(g[rows].sum())
        h_sum = float(h[rows].sum())
        if depth >= config.max_depth or rows.size < 2:
            weight = -g_sum / (h_sum + lam)
            builder.set_leaf(node, weight)
            row_value[rows] = weight
            return node

        best = None  # (gain, feature, threshold, missing_left)
        for f in range(n_features):
            v = X[rows, f]
            nan = np.isnan(v)
            g_miss = float(g[rows[nan]].sum())
            h_miss = float(h[rows[nan]].sum())
            c_miss = int(nan.sum())
            vv = v[~nan]
            if vv.size < 1:
                continue
            order = np.argsort(vv, kind="stable")
            vs = vv[order]
            gs = g[rows[~nan]][order]
            hs = h[rows[~nan]][order]
            cg = np.cumsum(gs)
            ch = np.cumsum(hs)
            boundaries = np.flatnonzero(np.diff(vs))
            for b in boundaries:
                threshold = (vs[b] + vs[b + 1]) / 2.0
                for missing_left in (True, False):
                    gl = cg[b] + (g_miss if missing_left else 0.0)
                    hl = ch[b] + (h_miss if missing_left else 0.0)
                    cl = (b + 1) + (c_miss if missing_left else 0)
                    gr = g_sum - gl
                    hr = h_sum - hl
                    cr = rows.size - cl
                    if hl < min_h or hr < min_h or cl < 1 or cr < 1:
                        continue
                    gain = _split_gain(gl, hl, gr, hr, lam)
                    if best is None or gain > best[0]:
                        best = (gain, f, threshold, missing_left)

        if best is None or best[0] <= 0.0:
            weight = -g_sum / (h_sum + lam)
            builder.set_leaf(node, weight)
            row_value[rows] = weight
            return node

        _, f, threshold, missing_left = best
        v = X[rows, f]
        nan = np.isnan(v)
        go_left = np.where(nan, missing_left, v < threshold)
        left = grow(rows[go_left], depth + 1)
        right = grow(rows[~go_left], depth + 1)
        builder.set_split(node, f, threshold, missing_left, left, right)
        return node

    grow(np.arange(n, dtype=np.int64), 0)
    return builder.build(), row_value


def train(X, y, config: BoostConfig = BoostConfig(),
          feature_names: Optional[Sequence[str]] = None) -> TreeEnsemble:
    """Fit a boosted ensemble on a (rows, features) matrix and boolean labels.

    The train log-loss is recorded before boosting and after every round;
    with a damped learning rate it is non-increasing, which the test suite
    asserts on every training run it performs.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y_arr = np.asarray(y, dtype=bool)
    n, f = X.shape
    if n < 2:
        raise ValueError("training needs at least 2 rows")
    if y_arr.all() or (~y_arr).all():
        raise ValueError("training data must contain both classes")
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(f))
    feature_names = tuple(feature_names)
    if len(feature_names) != f:
        raise ValueError("feature_names length does not match X")

    if config.base_score is not None:
        base = float(config.base_score)
    else:
        rate = float(np.clip(y_arr.mean(), 1e-15, 1 - 1e-15))
        base = math.log(rate / (1.0 - rate))

    y_float = y_arr.astype(float)
    margins = np.full(n, base, dtype=float)
    losses = [log_loss(y_float, margins)]

    if config.tree_method == "hist":
        codes, edges = _bin_features(X, config.n_bins)

    trees: list[Tree] = []
    for _ in range(config.n_rounds):
        g, h = logistic_grad_hess(y_float, margins)
        if config.tree_method == "hist":
            tree, row_value = _grow_tree_hist(codes, edges, g, h, config)
        else:
            tree, row_value = _grow_tree_exact(X, g, h, config)
        trees.append(tree)
        margins += config.learning_rate * row_value
        losses.append(log_loss(y_float, margins))

    return TreeEnsemble(
        base_score=base, learning_rate=config.learning_rate, trees=trees,
        feature_names=feature_names, config=config,
        train_loss_history=tuple(losses),
    )


def predict_proba(ensemble: TreeEnsemble, X) -> np.ndarray:
    return ensemble.predict_proba(X)


def _node_to_dict(tree: Tree, node: int) -> dict:
    if tree.is_leaf(node):
        return {"leaf": float(tree.value[node]), "cover": float(tree.cover[node])}
    return {
        "feature": int(tree.feature[node]),
        "threshold": float(tree.threshold[node]),
        "missing": "left" if tree.missing_left[node] else "right",
        "cover": float(tree.cover[node]),
        "left": _node_to_dict(tree, int(tree.left[node])),
        "right": _node_to_dict(tree, int(tree.right[node])),
    }


def _node_from_dict(node: dict, builder: _TreeBuilder) -> int:
    idx = builder.add_node(cover=float(node.get("cover", 0.0)))
    if "leaf" in node:
        builder.set_leaf(idx, float(node["leaf"]))
        return idx
    left = _node_from_dict(node["left"], builder)
    right = _node_from_dict(node["right"], builder)
    builder.set_split(idx, int(node["feature"]), float(node["threshold"]),
                      node.get("missing", "left") == "left", left, right)
    return idx


def to_json_dict(ensemble: TreeEnsemble) -> dict:
    cfg = None
    if ensemble.config is not None:
        cfg = asdict(ensemble.config)
    return {
        "version": MODEL_FORMAT_VERSION,
        "base_score": float(ensemble.base_score),
        "learning_rate": float(ensemble.learning_rate),
        "feature_names": list(ensemble.feature_names),
        "train_config": cfg,
        "trees": [_node_to_dict(t, 0) for t in ensemble.trees],
    }


def from_json_dict(payload: dict) -> TreeEnsemble:
    if not isinstance(payload, dict) or "version" not in payload:
        raise ModelFormatError("not a model file: missing version field")
    if payload["version"] != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format version {payload['version']!r}; "
            f"this build reads version {MODEL_FORMAT_VERSION}")
    trees = []
    for node in payload["trees"]:
        builder = _TreeBuilder()
        _node_from_dict(node, builder)
        trees.append(builder.build())
    cfg = payload.get("train_config")
    config = BoostConfig(**cfg) if cfg else None
    return TreeEnsemble(
        base_score=float(payload["base_score"]),
        learning_rate=float(payload["learning_rate"]),
        trees=trees,
        feature_names=tuple(payload["feature_names"]),
        config=config,
    )


def serialize(ensemble: TreeEnsemble, path) -> None:
    Path(path).write_text(json.dumps(to_json_dict(ensemble)), encoding="utf-8")


def deserialize(path) -> TreeEnsemble:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"cannot parse model file: {exc}") from exc
    return from_json_dict(payload)
