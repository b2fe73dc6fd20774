import json

import numpy as np
import pytest

from connrisk import gbdt
from connrisk.domain import DsmStage
from connrisk.pipeline import (
    GmmConfig, RunConfig, StageError, compare_stages, config_hash,
    fitted_params_digest, run_stage,
)
from connrisk.synthgen import SynthConfig, generate


def small_config(stage=DsmStage.STRATEGIC, seed=5, rows=8_000, **overrides):
    defaults = dict(
        stage=stage,
        synth=SynthConfig(seed=seed, n_rows=rows),
        seed=seed,
        gmm=GmmConfig(components=25, max_iter=25, tol=1.0),
        boost=gbdt.BoostConfig(n_rounds=20, max_depth=5),
        shap_rows=400,
        render_figures=False,
    )
    defaults.update(overrides)
    return RunConfig(**defaults)


@pytest.fixture(scope="module")
def strategic_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle") / "strategic"
    report = run_stage(small_config(), out)
    return report, out


class TestRunStage:
    def test_model_beats_baseline(self, strategic_run):
        report, _ = strategic_run
        d = report.to_dict()
        assert d["model"]["auc_roc"] > d["baseline"]["auc_roc"]

    def test_bundle_artifacts_written(self, strategic_run):
        _, out = strategic_run
        for name in ("report.json", "model.json", "preprocess.json",
                     "baseline_sweep.csv", "shap_summary.csv",
                     "curves/roc_model.csv", "curves/pr_model.csv",
                     "curves/roc_baseline.csv", "curves/pr_baseline.csv"):
            assert (out / name).exists(), name

    def test_report_is_replayable_json(self, strategic_run):
        _, out = strategic_run
        d = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert d["config_hash"]
        assert d["dataset"]["n_train"] + d["dataset"]["n_test"] == d["dataset"]["n_kept"]
        assert 0.04 < d["dataset"]["minority_fraction"] < 0.08

    def test_mct_row_present_in_report(self, strategic_run):
        report, _ = strategic_run
        assert report.to_dict()["baseline"]["mct_row"]["threshold"] == 60

    def test_deterministic_modulo_timings(self, tmp_path):
        config = small_config(seed=9, rows=4_000,
                              gmm=GmmConfig(components=10, max_iter=15, tol=1.0),
                              boost=gbdt.BoostConfig(n_rounds=8, max_depth=4))
        run_stage(config, tmp_path / "a")
        run_stage(config, tmp_path / "b")
        a = json.loads((tmp_path / "a" / "report.json").read_text(encoding="utf-8"))
        b = json.loads((tmp_path / "b" / "report.json").read_text(encoding="utf-8"))
        a.pop("timings"), b.pop("timings")
        assert a == b

    def test_failed_step_removes_partial_artifacts(self, tmp_path, monkeypatch):
        from connrisk import pipeline as pl
        def boom(records, config):
            raise RuntimeError("induced failure")
        monkeypatch.setattr(pl, "prepare_and_fit", boom)
        out = tmp_path / "broken"
        with pytest.raises(StageError) as err:
            pl.run_stage(small_config(rows=500), out)
        assert err.value.step == "fit"
        assert not out.exists()
        assert not list(tmp_path.glob(".broken.tmp-*"))

    def test_figures_rendered_when_enabled(self, tmp_path):
        config = small_config(seed=4, rows=4_000, render_figures=True,
                              gmm=GmmConfig(components=10, max_iter=15, tol=1.0),
                              boost=gbdt.BoostConfig(n_rounds=6, max_depth=3))
        run_stage(config, tmp_path / "withfigs")
        for name in ("roc.png", "pr.png", "shap_summary.png"):
            assert (tmp_path / "withfigs" / "figures" / name).exists()

    def test_config_requires_exactly_one_source(self):
        with pytest.raises(ValueError):
            RunConfig(stage=DsmStage.STRATEGIC)
        with pytest.raises(ValueError):
            RunConfig(stage=DsmStage.STRATEGIC, synth=SynthConfig(), csv_path="x.csv")


class TestLeakage:
    def test_row_bookkeeping_disjoint(self, strategic_run):
        report, _ = strategic_run
        fit = report.fit
        assert np.intersect1d(fit.train.row_ids, fit.test.row_ids).size == 0
        assert set(fit.train.row_ids) | set(fit.test.row_ids) == set(range(len(fit.labels)))

    def test_flipping_test_label_changes_no_fitted_parameter(self):
        from connrisk.pipeline import fit_prepared, prepare_stage
        config = small_config(seed=13, rows=5_000,
                              gmm=GmmConfig(components=10, max_iter=15, tol=1.0),
                              boost=gbdt.BoostConfig(n_rounds=8, max_depth=4))
        prepared = prepare_stage(generate(config.synth), config)
        digest1 = fitted_params_digest(fit_prepared(prepared))
        flipped = prepared.labels.copy()
        flipped[prepared.test_idx[0]] = ~flipped[prepared.test_idx[0]]
        digest2 = fitted_params_digest(fit_prepared(prepared, labels=flipped))
        assert digest1 == digest2

    def test_flipping_train_label_does_change_parameters(self):
        from connrisk.pipeline import fit_prepared, prepare_stage
        config = small_config(seed=13, rows=5_000,
                              gmm=GmmConfig(components=10, max_iter=15, tol=1.0),
                              boost=gbdt.BoostConfig(n_rounds=8, max_depth=4))
        prepared = prepare_stage(generate(config.synth), config)
        digest1 = fitted_params_digest(fit_prepared(prepared))
        flipped = prepared.labels.copy()
        flipped[prepared.train_idx[0]] = ~flipped[prepared.train_idx[0]]
        digest2 = fitted_params_digest(fit_prepared(prepared, labels=flipped))
        assert digest1 != digest2


class TestCompareStages:
    def make_report_dict(self, stage, auc=0.95):
        return {
            "stage": stage,
            "model": {"auc_roc": auc, "auc_pr": 0.5,
                      "best_g_mean": {"threshold": 0.4, "value": 0.9},
                      "best_f1": {"threshold": 0.5, "value": 0.8}},
            "baseline": {"auc_roc": 0.8, "auc_pr": 0.3},
            "cost": {"r_min": 1.25},
        }

    def test_four_reports_four_rows(self):
        reports = [self.make_report_dict(s.value) for s in DsmStage]
        rows = compare_stages(reports)
        assert len(rows) == 4
        assert all(r["present"] for r in rows)

    def test_missing_stage_marked(self):
        reports = [self.make_report_dict("strategic"), self.make_report_dict("tactical")]
        rows = compare_stages(reports)
        gap = next(r for r in rows if r["stage"] == "pre-tactical")
        assert not gap["present"] and gap["model_auc_roc"] is None

    def test_values_match_source_reports(self):
        reports = [self.make_report_dict("tactical", auc=0.9876)]
        rows = compare_stages(reports)
        row = next(r for r in rows if r["stage"] == "tactical")
        assert row["model_auc_roc"] == 0.9876
        assert row["baseline_auc_roc"] == 0.8
        assert row["r_min"] == 1.25


class TestPostOperationsCost:
    def test_cost_marked_not_applicable(self, tmp_path):
        config = small_config(stage=DsmStage.POST_OPERATIONS, seed=3, rows=5_000,
                              gmm=GmmConfig(components=10, max_iter=15, tol=1.0),
                              boost=gbdt.BoostConfig(n_rounds=8, max_depth=4))
        report = run_stage(config, tmp_path / "post")
        d = report.to_dict()
        assert d["cost"]["applicable"] is False
        assert d["cost"]["delta_c"] is None


def test_config_hash_stable_and_sensitive():
    c1 = small_config(seed=1)
    c2 = small_config(seed=1)
    c3 = small_config(seed=2)
    assert config_hash(c1) == config_hash(c2)
    assert config_hash(c1) != config_hash(c3)
