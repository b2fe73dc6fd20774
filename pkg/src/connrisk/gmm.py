"""Diagonal-covariance Gaussian mixtures: EM fitting, information criteria,
sampling and minority-class oversampling.

The mixture density is p(x) = sum_k pi_k N(x; mu_k, diag(var_k)). Diagonal
covariances keep fitting cheap at a couple hundred components while still
approximating arbitrary densities when K is large enough.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

#: Smallest per-dimension variance; prevents components from collapsing onto
#: single points in standardized feature space.
VARIANCE_FLOOR = 1e-6

_LOG_2PI = math.log(2.0 * math.pi)


class NotFittedError(RuntimeError):
    pass


@dataclass(frozen=True)
class GmmModel:
    """A fitted mixture: weights (K,), means (K, d), variances (K, d)."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    log_likelihood: float
    n_fit: int
    n_iter: int
    converged: bool
    log_likelihood_history: tuple[float, ...] = ()

    def __post_init__(self):
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        if np.any(self.variances < VARIANCE_FLOOR * (1 - 1e-12)):
            raise ValueError("variances below the variance floor")

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def to_manifest(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "log_likelihood": self.log_likelihood,
            "n_fit": self.n_fit,
            "n_iter": self.n_iter,
            "converged": self.converged,
        }

    @classmethod
    def from_manifest(cls, manifest: dict) -> "GmmModel":
        return cls(
            weights=np.asarray(manifest["weights"], dtype=float),
            means=np.asarray(manifest["means"], dtype=float),
            variances=np.asarray(manifest["variances"], dtype=float),
            log_likelihood=float(manifest["log_likelihood"]),
            n_fit=int(manifest["n_fit"]),
            n_iter=int(manifest["n_iter"]),
            converged=bool(manifest["converged"]),
        )


def _component_log_density(model_means, model_variances, X) -> np.ndarray:
    """log N(x_i; mu_k, diag(var_k)) for all rows and components, shape (n, K)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    diff = X[:, None, :] - model_means[None, :, :]          # (n, K, d)
    maha = np.sum(diff * diff / model_variances[None, :, :], axis=2)
    log_det = np.sum(np.log(model_variances), axis=1)        # (K,)
    d = model_means.shape[1]
    return -0.5 * (d * _LOG_2PI + log_det[None, :] + maha)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def log_density(model: GmmModel, x) -> float | np.ndarray:
    """Log mixture density at x; accepts a single point (d,) or rows (n, d)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.d:
        raise ValueError(f"dimension mismatch: model d={model.d}, x has {X.shape[1]}")
    weighted = _component_log_density(model.means, model.variances, X) + np.log(model.weights)[None, :]
    out = _logsumexp(weighted, axis=1)
    return float(out[0]) if single else out


def _kmeanspp_means(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ style seeding: spread initial means by squared distance."""
    n = X.shape[0]
    means = np.empty((k, X.shape[1]), dtype=float)
    means[0] = X[rng.integers(n)]
    d2 = np.sum((X - means[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            means[j] = X[rng.integers(n)]
            continue
        probs = d2 / total
        means[j] = X[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((X - means[j]) ** 2, axis=1))
    return means


def fit_em(data, k: int, init_seed: int = 0, max_iter: int = 200,
           tol: float = 1e-6, variance_floor: float = VARIANCE_FLOOR) -> GmmModel:
    """Fit a diagonal-covariance mixture by expectation-maximization.

    Initialization: k-means++ seeding for the means, uniform weights and
    the per-feature data variance for every component. Iterates until the
    absolute log-likelihood improvement drops below ``tol`` or ``max_iter``
    is reached. The log-likelihood history is recorded on the model.
    """
    X = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = X.shape
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the {n} available rows")
    rng = np.random.default_rng(init_seed)

    means = _kmeanspp_means(X, k, rng)
    weights = np.full(k, 1.0 / k)
    base_var = np.maximum(X.var(axis=0, ddof=0), variance_floor)
    variances = np.tile(base_var, (k, 1))

    history: list[float] = []
    converged = False
    log_l = -np.inf
    for _ in range(max_iter):
        log_comp = _component_log_density(means, variances, X) + np.log(weights)[None, :]
        row_log = _logsumexp(log_comp, axis=1)
        new_log_l = float(row_log.sum())
        history.append(new_log_l)
        if np.isfinite(log_l) and abs(new_log_l - log_l) < tol:
            converged = True
            log_l = new_log_l
            break
        log_l = new_log_l

        resp = np.exp(log_comp - row_log[:, None])           # responsibilities, rows sum to 1
        n_k = resp.sum(axis=0) + 10 * np.finfo(float).eps     # guard empty components
        weights = n_k / n_k.sum()
        means = (resp.T @ X) / n_k[:, None]
        sq = resp.T @ (X * X)
        variances = sq / n_k[:, None] - means * means
        variances = np.maximum(variances, variance_floor)

    return GmmModel(
        weights=weights, means=means, variances=variances,
        log_likelihood=log_l, n_fit=n, n_iter=len(history), converged=converged,
        log_likelihood_history=tuple(history),
    )


def n_free_parameters(k: int, d: int) -> int:
    """Free parameters of a diagonal mixture: K means and variances per
    dimension plus K-1 independent weights."""
    return k * (2 * d + 1) - 1


def criteria_values(log_l: float, n_params: int, n_samples: float,
                    standard_bic: bool = False) -> tuple[float, float]:
    """(AIC, BIC) from a log-likelihood.

    AIC = -2 log L + 2 K_p. The default BIC uses the doubled penalty
    -2 log L + 2 K_p log N; pass ``standard_bic=True`` for the textbook
    K_p log N penalty. The doubled variant is stricter, so the two can
    select different K.
    """
    aic = -2.0 * log_l + 2.0 * n_params
    factor = 1.0 if standard_bic else 2.0
    bic = -2.0 * log_l + factor * n_params * math.log(n_samples) if n_samples > 0 else math.nan
    return aic, bic


@dataclass(frozen=True)
class InformationCriteria:
    aic: float
    bic: float
    n_params: int


def information_criteria(model: GmmModel, standard_bic: bool = False) -> InformationCriteria:
    if model.n_fit <= 0 or not np.isfinite(model.log_likelihood):
        raise NotFittedError("information criteria need a fitted model with recorded log L")
    n_params = n_free_parameters(model.k, model.d)
    aic, bic = criteria_values(model.log_likelihood, n_params, model.n_fit,
                               standard_bic=standard_bic)
    return InformationCriteria(aic=aic, bic=bic, n_params=n_params)


def best_candidate_index(values: Sequence[float], ks: Sequence[int]) -> int:
    """Index of the lowest criterion value; exact ties resolve to smaller K."""
    best = 0
    for i in range(1, len(values)):
        if values[i] < values[best] or (values[i] == values[best] and ks[i] < ks[best]):
            best = i
    return best


def select_model(data, k_candidates: Sequence[int], criterion: str = "bic",
                 init_seed: int = 0, max_iter: int = 200, tol: float = 1e-6,
                 standard_bic: bool = False) -> GmmModel:
    """Fit every candidate K and keep the one with the lowest criterion."""
    if criterion not in ("aic", "bic"):
        raise ValueError(f"unknown criterion {criterion!r}")
    ks = list(k_candidates)
    if not ks:
        raise ValueError("empty candidate list")
    fits = [fit_em(data, k, init_seed=init_seed, max_iter=max_iter, tol=tol) for k in ks]
    scores = []
    for fit in fits:
        ic = information_criteria(fit, standard_bic=standard_bic)
        scores.append(ic.aic if criterion == "aic" else ic.bic)
    return fits[best_candidate_index(scores, ks)]


def sample(model: GmmModel, n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Draw n rows: component by mixture weight, then a diagonal Gaussian.

    Returns (rows, component indices).
    """
    rng = np.random.default_rng(seed)
    comps = rng.choice(model.k, size=n, p=model.weights)
    noise = rng.standard_normal((n, model.d))
    rows = model.means[comps] + noise * np.sqrt(model.variances[comps])
    return rows, comps


def mixture_mean(model: GmmModel) -> np.ndarray:
    return model.weights @ model.means


def oversample_minority(X, y, k: int = 200, target_ratio: float = 1.0,
                        seed: int = 0, max_iter: int = 200, tol: float = 1e-6,
                        k_cap_divisor: int = 10) -> tuple[np.ndarray, np.ndarray, GmmModel, int]:
    """Augment the minority class with draws from a mixture fitted on it.

    Synthetic positive rows are appended until minority/majority reaches
    ``target_ratio``; majority rows are untouched. K is capped at
    minority_count // ``k_cap_divisor`` (at least 1) so components keep
    enough support on small runs; a warning is emitted when the cap or the
    row count forces a smaller K than requested.

    Returns (X_augmented, y_augmented, fitted mixture, n_synthetic).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=bool)
    if not 0.0 < target_ratio <= 1.0:
        raise ValueError("target_ratio must be in (0, 1]")
    minority = X[y]
    n_min, n_maj = len(minority), int((~y).sum())
    if n_min == 0:
        raise ValueError("minority class is empty")
    k_eff = min(k, max(1, n_min // k_cap_divisor), n_min)
    if k_eff < k:
        warnings.warn(
            f"reducing mixture components from {k} to {k_eff} to keep "
            f"support for {n_min} minority rows", stacklevel=2)
    model = fit_em(minority, k_eff, init_seed=seed, max_iter=max_iter, tol=tol)
    n_needed = max(0, int(math.ceil(target_ratio * n_maj)) - n_min)
    if n_needed == 0:
        return X, y, model, 0
    synthetic, _ = sample(model, n_needed, seed=seed + 1)
    X_aug = np.vstack([X, synthetic])
    y_aug = np.concatenate([y, np.ones(n_needed, dtype=bool)])
    return X_aug, y_aug, model, n_needed
