"""End-to-end stage runs: data prep, fitting, evaluation and persisted bundles.

One run covers a single decision stage: select the stage's features, drop
incomplete rows, split train/test stratified, fit the encoder and
standardizer on the training side only, oversample the minority class with
a mixture model in standardized space, boost trees, then evaluate model and
threshold baseline on the identical test split and persist everything
atomically. Every fitting step sees training rows exclusively; row ids are
carried through so tests can assert that.
"""
from __future__ import annotations

import hashlib
import json
import os
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import baseline as baseline_mod
from . import gbdt, gmm, metrics, shap
from .cost import CostAnalysis, CostParameters, cost_report
from .domain import ConnectionRecord, Dataset, DsmStage, feature_frame, stage_features, stage_time_feature
from .preprocess import Preprocessor, stratified_split_indices
from .synthgen import SynthConfig, generate, ingest_csv, listwise_delete

REPORT_VERSION = 1


class StageError(RuntimeError):
    """A pipeline step failed; partial artifacts have been removed."""

    def __init__(self, step: str, cause: BaseException):
        super().__init__(f"stage run failed during step {step!r}: {cause}")
        self.step = step
        self.cause = cause


@dataclass(frozen=True)
class GmmConfig:
    components: int = 200
    target_ratio: float = 1.0
    max_iter: int = 60
    tol: float = 1.0
    select_candidates: Optional[tuple[int, ...]] = None
    criterion: str = "bic"
    standard_bic: bool = False

    def to_dict(self) -> dict:
        return {
            "components": self.components, "target_ratio": self.target_ratio,
            "max_iter": self.max_iter, "tol": self.tol,
            "select_candidates": list(self.select_candidates) if self.select_candidates else None,
            "criterion": self.criterion, "standard_bic": self.standard_bic,
        }


@dataclass(frozen=True)
class RunConfig:
    stage: DsmStage
    synth: Optional[SynthConfig] = None
    csv_path: Optional[str] = None
    seed: int = 7
    test_fraction: float = 0.10
    encoder_smoothing: float = 20.0
    gmm: GmmConfig = field(default_factory=GmmConfig)
    boost: gbdt.BoostConfig = field(default_factory=gbdt.BoostConfig)
    cost_ratio: float = 2.0
    cost_prev: float = 1.0
    threshold_objective: str = "g_mean"
    shap_rows: Optional[int] = None  # None = explain the full test split
    render_figures: bool = True

    def __post_init__(self):
        if (self.synth is None) == (self.csv_path is None):
            raise ValueError("exactly one data source (synth config or csv_path) is required")
        if self.threshold_objective not in ("g_mean", "f1"):
            raise ValueError("threshold_objective must be g_mean or f1")

    def to_dict(self) -> dict:
        from dataclasses import asdict
        return {
            "stage": DsmStage(self.stage).value,
            "synth": self.synth.to_dict() if self.synth else None,
            "csv_path": self.csv_path,
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "encoder_smoothing": self.encoder_smoothing,
            "gmm": self.gmm.to_dict(),
            "boost": asdict(self.boost),
            "cost_ratio": self.cost_ratio,
            "cost_prev": self.cost_prev,
            "threshold_objective": self.threshold_objective,
            "shap_rows": self.shap_rows,
        }


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _subset_frame(frame: dict[str, list], idx: np.ndarray) -> dict[str, list]:
    return {k: [v[i] for i in idx] for k, v in frame.items()}


def _params_sha256(model: gmm.GmmModel) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(model.weights).tobytes())
    h.update(np.ascontiguousarray(model.means).tobytes())
    h.update(np.ascontiguousarray(model.variances).tobytes())
    return h.hexdigest()[:16]


@dataclass
class PreparedStage:
    """Cleaned rows and a frozen train/test partition, before any fitting."""

    config: RunConfig
    features: tuple[str, ...]
    records_total: int
    dropped: int
    labels: np.ndarray
    frame: dict[str, list]
    train_idx: np.ndarray
    test_idx: np.ndarray


@dataclass
class FittedStage:
    """Everything produced by the fitting half of a run."""

    config: RunConfig
    features: tuple[str, ...]
    records_total: int
    dropped: int
    labels: np.ndarray
    frame: dict[str, list]
    train_idx: np.ndarray
    test_idx: np.ndarray
    preprocessor: Preprocessor
    train: Dataset
    test: Dataset
    gmm_model: gmm.GmmModel
    gmm_k_requested: int
    n_synthetic: int
    train_aug_y: np.ndarray
    ensemble: gbdt.TreeEnsemble


def _load_records(config: RunConfig) -> list[ConnectionRecord]:
    if config.synth is not None:
        return generate(config.synth)
    return ingest_csv(config.csv_path, DsmStage(config.stage)).records


def prepare_stage(records: Sequence[ConnectionRecord], config: RunConfig) -> PreparedStage:
    """Feature selection, listwise deletion and the stratified partition."""
    stage = DsmStage(config.stage)
    features = stage_features(stage)
    kept, dropped = listwise_delete(records, features)
    if not kept:
        raise ValueError("no records survive listwise deletion")
    labels = np.array([r.missed for r in kept], dtype=bool)
    frame = feature_frame(kept, features)
    train_idx, test_idx = stratified_split_indices(
        labels, test_fraction=config.test_fraction, seed=config.seed)
    assert np.intersect1d(train_idx, test_idx).size == 0
    return PreparedStage(
        config=config, features=features, records_total=len(records), dropped=dropped,
        labels=labels, frame=frame, train_idx=train_idx, test_idx=test_idx,
    )


def fit_prepared(prepared: PreparedStage, labels: Optional[np.ndarray] = None) -> FittedStage:
    """Fit every learned component on the training side of a fixed partition.

    ``labels`` defaults to the prepared labels; passing a modified copy lets
    leakage tests flip test-row labels while holding the partition fixed and
    verify that nothing fitted changes. Only labels[train_idx] are ever read.
    """
    config = prepared.config
    labels = prepared.labels if labels is None else np.asarray(labels, dtype=bool)
    features = prepared.features
    train_idx, test_idx = prepared.train_idx, prepared.test_idx

    train_frame = _subset_frame(prepared.frame, train_idx)
    test_frame = _subset_frame(prepared.frame, test_idx)
    pre = Preprocessor.fit(train_frame, labels[train_idx], features,
                           m=config.encoder_smoothing)
    train = pre.transform(train_frame, labels[train_idx], train_idx)
    test = pre.transform(test_frame, labels[test_idx], test_idx)

    k = config.gmm.components
    if config.gmm.select_candidates:
        selected = gmm.select_model(
            train.X[train.y], config.gmm.select_candidates,
            criterion=config.gmm.criterion, init_seed=config.seed + 1,
            max_iter=config.gmm.max_iter, tol=config.gmm.tol,
            standard_bic=config.gmm.standard_bic)
        k = selected.k
    X_aug, y_aug, gmm_model, n_synth = gmm.oversample_minority(
        train.X, train.y, k=k, target_ratio=config.gmm.target_ratio,
        seed=config.seed + 1, max_iter=config.gmm.max_iter, tol=config.gmm.tol)

    ensemble = gbdt.train(X_aug, y_aug, config.boost, feature_names=train.feature_names)

    return FittedStage(
        config=config, features=features, records_total=prepared.records_total,
        dropped=prepared.dropped, labels=labels, frame=prepared.frame,
        train_idx=train_idx, test_idx=test_idx,
        preprocessor=pre, train=train, test=test,
        gmm_model=gmm_model, gmm_k_requested=config.gmm.components, n_synthetic=n_synth,
        train_aug_y=y_aug, ensemble=ensemble,
    )


def prepare_and_fit(records: Sequence[ConnectionRecord], config: RunConfig) -> FittedStage:
    """Steps up to and including model training; no test label is read."""
    return fit_prepared(prepare_stage(records, config))


def fitted_params_digest(fit: FittedStage) -> str:
    """Hash of every fitted parameter; leakage tests compare this digest."""
    h = hashlib.sha256()
    h.update(json.dumps(fit.preprocessor.to_manifest(), sort_keys=True).encode())
    h.update(_params_sha256(fit.gmm_model).encode())
    h.update(json.dumps(gbdt.to_json_dict(fit.ensemble), sort_keys=True).encode())
    return h.hexdigest()


@dataclass
class StageEvaluation:
    probabilities: np.ndarray
    margins: np.ndarray
    roc: metrics.Curve
    auc_roc: float
    pr: metrics.Curve
    auc_pr: float
    best_g_mean: tuple[float, float]
    best_f1: tuple[float, float]
    selected_threshold: float
    counts: metrics.ConfusionCounts
    rates: metrics.Rates
    baseline: baseline_mod.ThresholdBaseline
    shap_summary: shap.ShapSummary
    cost: CostAnalysis


def evaluate(fit: FittedStage) -> StageEvaluation:
    """Score and evaluate the fitted stage on its held-out test split."""
    config = fit.config
    stage = DsmStage(config.stage)
    y_test = fit.test.y
    margins = fit.ensemble.predict_margin(fit.test.X)
    probs = gbdt.sigmoid(margins)

    roc, auc_roc = metrics.roc_curve(y_test, probs)
    pr, auc_pr = metrics.pr_curve(y_test, probs)
    best_g = metrics.best_threshold(y_test, probs, "g_mean")
    best_f = metrics.best_threshold(y_test, probs, "f1")
    selected = best_g[0] if config.threshold_objective == "g_mean" else best_f[0]
    counts = metrics.counts_at_threshold(y_test, probs, selected)
    rate_block = metrics.rates(counts)

    time_feature = stage_time_feature(stage)
    times_test = np.array([fit.frame[time_feature][i] for i in fit.test_idx], dtype=float)
    baseline = baseline_mod.evaluate_baseline(times_test, y_test, time_feature)

    if config.shap_rows is not None and config.shap_rows < fit.test.n:
        rng = np.random.default_rng(config.seed + 3)
        pick = np.sort(rng.choice(fit.test.n, size=config.shap_rows, replace=False))
    else:
        pick = np.arange(fit.test.n)
    summary = shap.summarize(fit.ensemble, fit.test.X[pick], row_ids=fit.test.row_ids[pick])

    cost = cost_report(counts, CostParameters(c_prev=config.cost_prev, r=config.cost_ratio),
                       preventable=stage is not DsmStage.POST_OPERATIONS)

    return StageEvaluation(
        probabilities=probs, margins=margins,
        roc=roc, auc_roc=auc_roc, pr=pr, auc_pr=auc_pr,
        best_g_mean=best_g, best_f1=best_f,
        selected_threshold=selected, counts=counts, rates=rate_block,
        baseline=baseline, shap_summary=summary, cost=cost,
    )


@dataclass
class EvaluationReport:
    """In-memory result of one stage run; ``to_dict`` is what report.json holds."""

    stage: DsmStage
    config: RunConfig
    fit: FittedStage
    eval: StageEvaluation
    timings: dict[str, float]
    artifacts: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        fit, ev = self.fit, self.eval
        gmm_ic = gmm.information_criteria(fit.gmm_model,
                                          standard_bic=self.config.gmm.standard_bic)
        minority_total = float(fit.labels.mean())
        return {
            "version": REPORT_VERSION,
            "stage": DsmStage(self.stage).value,
            "config": self.config.to_dict(),
            "config_hash": config_hash(self.config),
            "seeds": {
                "split": self.config.seed,
                "gmm": self.config.seed + 1,
                "shap_sample": self.config.seed + 3,
            },
            "dataset": {
                "n_records": fit.records_total,
                "n_kept": int(fit.labels.size),
                "n_dropped": fit.dropped,
                "drop_fraction": fit.dropped / fit.records_total if fit.records_total else 0.0,
                "minority_fraction": minority_total,
                "n_train": int(fit.train.n),
                "n_test": int(fit.test.n),
                "n_synthetic": fit.n_synthetic,
                "train_positive_fraction_after_oversample": float(fit.train_aug_y.mean()),
            },
            "gmm": {
                "k_requested": fit.gmm_k_requested,
                "k": fit.gmm_model.k,
                "log_likelihood": fit.gmm_model.log_likelihood,
                "n_iter": fit.gmm_model.n_iter,
                "converged": fit.gmm_model.converged,
                "aic": gmm_ic.aic,
                "bic": gmm_ic.bic,
                "params_sha256": _params_sha256(fit.gmm_model),
            },
            "baseline": ev.baseline.to_dict(),
            "model": {
                "n_trees": len(fit.ensemble.trees),
                "base_score": fit.ensemble.base_score,
                "train_loss_first": fit.ensemble.train_loss_history[0],
                "train_loss_last": fit.ensemble.train_loss_history[-1],
                "auc_roc": ev.auc_roc,
                "auc_pr": ev.auc_pr,
                "best_g_mean": {"threshold": ev.best_g_mean[0], "value": ev.best_g_mean[1]},
                "best_f1": {"threshold": ev.best_f1[0], "value": ev.best_f1[1]},
                "selected_threshold": ev.selected_threshold,
                "threshold_objective": self.config.threshold_objective,
                "counts_at_selected": ev.counts.to_dict(),
                "rates_at_selected": ev.rates.to_dict(),
            },
            "shap": {
                "base_value": ev.shap_summary.base_value,
                "n_rows": int(ev.shap_summary.shap_matrix.shape[0]),
                "importance": [
                    {"feature": name, "mean_abs_shap": imp, "rank": rank}
                    for name, imp, rank in ev.shap_summary.ranking()
                ],
            },
            "cost": ev.cost.to_dict(),
            "artifacts": list(self.artifacts),
            "timings": self.timings,
        }


def _write_curve_csv(path: Path, curve: metrics.Curve):
    import csv as _csv
    header = {"roc": ("fpr", "tpr", "threshold"), "pr": ("recall", "precision", "threshold")}
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(header[curve.kind])
        for x, y, t in curve.rows():
            writer.writerow([repr(float(x)), repr(float(y)), repr(float(t))])


def write_sweep_csv(path: Path, report: baseline_mod.ThresholdBaseline):
    import csv as _csv
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["threshold", "TP", "FP", "TN", "FN",
                         "tpr", "fpr", "precision", "recall", "g_mean", "f1"])
        for row in report.rows:
            c, r = row.counts, row.rates
            writer.writerow([row.threshold, c.tp, c.fp, c.tn, c.fn,
                             repr(r.tpr), repr(r.fpr), repr(r.precision),
                             repr(r.recall), repr(r.g_mean), repr(r.f1)])


def _write_shap_csv(path: Path, summary: shap.ShapSummary):
    import csv as _csv
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["feature", "row_id", "shap_value", "feature_value", "rank"])
        for feature, row_id, value, feature_val, rank in summary.to_csv_rows():
            writer.writerow([feature, row_id, repr(value), repr(feature_val), rank])


def run_stage(config: RunConfig, out_dir) -> EvaluationReport:
    """Run one stage end to end and write its bundle atomically to out_dir.

    On any step failure the partially written bundle is removed and a
    StageError naming the failing step is raised.
    """
    out_dir = Path(out_dir)
    timings: dict[str, float] = {}
    step = "load"

    def timed(name, fn, *args, **kwargs):
        nonlocal step
        step = name
        started = time.perf_counter()
        result = fn(*args, **kwargs)
        timings[name] = round(time.perf_counter() - started, 3)
        return result

    tmp = out_dir.parent / f".{out_dir.name}.tmp-{os.getpid()}"
    try:
        records = timed("load", _load_records, config)
        fit = timed("fit", prepare_and_fit, records, config)
        ev = timed("evaluate", evaluate, fit)

        step = "write"
        started = time.perf_counter()
        if tmp.exists():
            shutil.rmtree(tmp)
        (tmp / "curves").mkdir(parents=True)

        artifacts = ["report.json", "model.json", "preprocess.json",
                     "baseline_sweep.csv", "shap_summary.csv",
                     "curves/roc_model.csv", "curves/pr_model.csv",
                     "curves/roc_baseline.csv", "curves/pr_baseline.csv"]
        gbdt.serialize(fit.ensemble, tmp / "model.json")
        serving = {
            "stage": DsmStage(config.stage).value,
            "features": list(fit.features),
            "preprocessor": fit.preprocessor.to_manifest(),
            "serving": {
                "threshold": ev.selected_threshold,
                "threshold_objective": config.threshold_objective,
                "test_precision": ev.rates.precision,
                "test_auc_roc": ev.auc_roc,
                "version": config_hash(config),
            },
        }
        (tmp / "preprocess.json").write_text(
            json.dumps(serving, sort_keys=True, indent=2), encoding="utf-8")
        write_sweep_csv(tmp / "baseline_sweep.csv", ev.baseline)
        _write_shap_csv(tmp / "shap_summary.csv", ev.shap_summary)
        _write_curve_csv(tmp / "curves" / "roc_model.csv", ev.roc)
        _write_curve_csv(tmp / "curves" / "pr_model.csv", ev.pr)
        _write_curve_csv(tmp / "curves" / "roc_baseline.csv", ev.baseline.roc)
        _write_curve_csv(tmp / "curves" / "pr_baseline.csv", ev.baseline.pr)

        if config.render_figures:
            from . import figures
            rendered = figures.render_stage_figures(tmp, DsmStage(config.stage).value, ev)
            artifacts.extend(rendered)

        timings["write"] = round(time.perf_counter() - started, 3)
        report = EvaluationReport(stage=DsmStage(config.stage), config=config,
                                  fit=fit, eval=ev, timings=timings,
                                  artifacts=tuple(artifacts))
        (tmp / "report.json").write_text(
            json.dumps(report.to_dict(), sort_keys=True, indent=2), encoding="utf-8")

        if out_dir.exists():
            shutil.rmtree(out_dir)
        tmp.rename(out_dir)
        return report
    except Exception as exc:
        if tmp.exists():
            shutil.rmtree(tmp, ignore_errors=True)
        if isinstance(exc, StageError):
            raise
        raise StageError(step, exc) from exc


STAGE_ORDER = (DsmStage.STRATEGIC, DsmStage.PRE_TACTICAL,
               DsmStage.TACTICAL, DsmStage.POST_OPERATIONS)


def compare_stages(reports: Sequence[dict]) -> list[dict]:
    """Side-by-side table of stage results; absent stages yield None cells."""
    by_stage = {r["stage"]: r for r in reports}
    rows = []
    for stage in STAGE_ORDER:
        r = by_stage.get(stage.value)
        if r is None:
            rows.append({"stage": stage.value, "present": False,
                         "model_auc_roc": None, "baseline_auc_roc": None,
                         "model_auc_pr": None, "baseline_auc_pr": None,
                         "g_mean": None, "f1": None, "r_min": None})
            continue
        rows.append({
            "stage": stage.value,
            "present": True,
            "model_auc_roc": r["model"]["auc_roc"],
            "baseline_auc_roc": r["baseline"]["auc_roc"],
            "model_auc_pr": r["model"]["auc_pr"],
            "baseline_auc_pr": r["baseline"]["auc_pr"],
            "g_mean": r["model"]["best_g_mean"]["value"],
            "f1": r["model"]["best_f1"]["value"],
            "r_min": r["cost"]["r_min"],
        })
    return rows
