"""Train-only-fitted preprocessing: stratified split, target encoding, standardization.

Both transforms are fitted exclusively on training rows and then applied
unchanged to test or serving rows; this is what keeps label information
from leaking into evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .domain import CATEGORICAL_FEATURES, ColumnMeta, Dataset


class NotFittedError(RuntimeError):
    pass


def stratified_split_indices(labels, test_fraction: float = 0.10,
                             seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Random per-class split into train/test index arrays.

    Each class contributes round(count * test_fraction) rows to the test
    side (round half up), so per-class test counts stay within +-1 of the
    exact proportion. Returned indices are sorted, disjoint and exhaustive.
    """
    y = np.asarray(labels, dtype=bool)
    if y.size == 0:
        raise ValueError("empty dataset")
    if y.all() or (~y).all():
        raise ValueError("stratified split requires both classes present")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    test_parts = []
    for cls in (False, True):
        idx = np.flatnonzero(y == cls)
        k = int(np.floor(len(idx) * test_fraction + 0.5))
        k = min(k, len(idx))
        perm = rng.permutation(idx)
        test_parts.append(perm[:k])
    test_idx = np.sort(np.concatenate(test_parts))
    mask = np.ones(y.size, dtype=bool)
    mask[test_idx] = False
    train_idx = np.flatnonzero(mask)
    return train_idx, test_idx


class TargetEncoder:
    """Smoothed mean target encoding for categorical features.

    A category c seen n_c times in training with positive rate ybar_c is
    encoded as lam * ybar_c + (1 - lam) * p where lam = n_c / (n_c + m) and
    p is the global training positive rate. Unseen categories fall back to
    p. All encoded values live in [0, 1].
    """

    def __init__(self, m: float = 20.0):
        if m <= 0:
            raise ValueError("smoothing weight m must be > 0")
        self.m = float(m)
        self.prior: Optional[float] = None
        self.mapping: Optional[dict[str, dict[str, float]]] = None

    def fit(self, frame: Mapping[str, Sequence], labels,
            categorical_features: Sequence[str]) -> "TargetEncoder":
        y = np.asarray(labels, dtype=float)
        self.prior = float(y.mean())
        self.mapping = {}
        for feature in categorical_features:
            values = frame[feature]
            sums: dict[str, float] = {}
            counts: dict[str, int] = {}
            for token, label in zip(values, y):
                if token is None:
                    continue
                sums[token] = sums.get(token, 0.0) + label
                counts[token] = counts.get(token, 0) + 1
            encoded = {}
            for token, n_c in counts.items():
                ybar = sums[token] / n_c
                lam = n_c / (n_c + self.m)
                encoded[token] = lam * ybar + (1.0 - lam) * self.prior
            self.mapping[feature] = encoded
        return self

    def _check_fitted(self):
        if self.mapping is None:
            raise NotFittedError("TargetEncoder used before fit")

    def encode_value(self, feature: str, token) -> float:
        self._check_fitted()
        if feature not in self.mapping:
            raise KeyError(f"feature {feature!r} was not fitted")
        if token is None:
            return self.prior
        return self.mapping[feature].get(token, self.prior)

    def transform_column(self, feature: str, values: Sequence) -> np.ndarray:
        self._check_fitted()
        table = self.mapping[feature]
        prior = self.prior
        return np.array([table.get(v, prior) if v is not None else prior for v in values],
                        dtype=float)

    def to_manifest(self) -> dict:
        self._check_fitted()
        return {"m": self.m, "prior": self.prior, "mapping": self.mapping}

    @classmethod
    def from_manifest(cls, manifest: dict) -> "TargetEncoder":
        enc = cls(m=manifest["m"])
        enc.prior = float(manifest["prior"])
        enc.mapping = {f: dict(t) for f, t in manifest["mapping"].items()}
        return enc


class Standardizer:
    """Per-feature (x - mean) / sd scaling with population statistics.

    Constant training columns are flagged and transformed to zeros instead
    of dividing by a zero spread.
    """

    def __init__(self):
        self.means: Optional[dict[str, float]] = None
        self.sds: Optional[dict[str, float]] = None
        self.constant: Optional[dict[str, bool]] = None

    def fit(self, frame: Mapping[str, Sequence], numeric_features: Sequence[str]) -> "Standardizer":
        self.means, self.sds, self.constant = {}, {}, {}
        for feature in numeric_features:
            col = np.asarray([v for v in frame[feature] if v is not None], dtype=float)
            if col.size == 0:
                raise ValueError(f"feature {feature!r} has no observed values")
            mu = float(col.mean())
            sd = float(col.std(ddof=0))
            self.means[feature] = mu
            self.sds[feature] = sd
            self.constant[feature] = sd == 0.0
        return self

    def _check_fitted(self):
        if self.means is None:
            raise NotFittedError("Standardizer used before fit")

    def transform_value(self, feature: str, value: float) -> float:
        self._check_fitted()
        if self.constant[feature]:
            return 0.0
        return (float(value) - self.means[feature]) / self.sds[feature]

    def transform_column(self, feature: str, values: Sequence) -> np.ndarray:
        self._check_fitted()
        col = np.asarray(values, dtype=float)
        if self.constant[feature]:
            return np.zeros_like(col)
        return (col - self.means[feature]) / self.sds[feature]

    def to_manifest(self) -> dict:
        self._check_fitted()
        return {"means": self.means, "sds": self.sds, "constant": self.constant}

    @classmethod
    def from_manifest(cls, manifest: dict) -> "Standardizer":
        std = cls()
        std.means = {k: float(v) for k, v in manifest["means"].items()}
        std.sds = {k: float(v) for k, v in manifest["sds"].items()}
        std.constant = {k: bool(v) for k, v in manifest["constant"].items()}
        return std


@dataclass(frozen=True)
class Preprocessor:
    """Fitted encoder + standardizer bound to one feature order."""

    features: tuple[str, ...]
    encoder: TargetEncoder
    standardizer: Standardizer

    @property
    def categorical(self) -> tuple[str, ...]:
        return tuple(f for f in self.features if f in CATEGORICAL_FEATURES)

    @property
    def numeric(self) -> tuple[str, ...]:
        return tuple(f for f in self.features if f not in CATEGORICAL_FEATURES)

    @classmethod
    def fit(cls, frame: Mapping[str, Sequence], labels, features: Sequence[str],
            m: float = 20.0) -> "Preprocessor":
        features = tuple(features)
        categorical = [f for f in features if f in CATEGORICAL_FEATURES]
        numeric = [f for f in features if f not in CATEGORICAL_FEATURES]
        encoder = TargetEncoder(m=m).fit(frame, labels, categorical)
        standardizer = Standardizer().fit(frame, numeric)
        return cls(features=features, encoder=encoder, standardizer=standardizer)

    def transform(self, frame: Mapping[str, Sequence], labels, row_ids) -> Dataset:
        """Encode a raw frame into the model's standardized matrix space."""
        n = len(next(iter(frame.values()))) if frame else 0
        cols = []
        metas = []
        for f in self.features:
            if f in CATEGORICAL_FEATURES:
                cols.append(self.encoder.transform_column(f, frame[f]))
                metas.append(ColumnMeta(name=f, kind="categorical-encoded"))
            else:
                cols.append(self.standardizer.transform_column(f, frame[f]))
                metas.append(ColumnMeta(name=f, kind="numeric"))
        X = np.column_stack(cols) if cols else np.zeros((n, 0))
        return Dataset(X=X, columns=tuple(metas),
                       y=np.asarray(labels, dtype=bool),
                       row_ids=np.asarray(row_ids, dtype=np.int64))

    def transform_row(self, raw: Mapping[str, object]) -> np.ndarray:
        """Encode one raw feature map (serving path); unknown tokens fall back to the prior."""
        values = np.empty(len(self.features), dtype=float)
        for i, f in enumerate(self.features):
            v = raw.get(f)
            if f in CATEGORICAL_FEATURES:
                values[i] = self.encoder.encode_value(f, v)
            elif v is None:
                values[i] = np.nan
            else:
                values[i] = self.standardizer.transform_value(f, float(v))
        return values

    def to_manifest(self) -> dict:
        return {
            "features": list(self.features),
            "encoder": self.encoder.to_manifest(),
            "standardizer": self.standardizer.to_manifest(),
        }

    @classmethod
    def from_manifest(cls, manifest: dict) -> "Preprocessor":
        return cls(
            features=tuple(manifest["features"]),
            encoder=TargetEncoder.from_manifest(manifest["encoder"]),
            standardizer=Standardizer.from_manifest(manifest["standardizer"]),
        )
