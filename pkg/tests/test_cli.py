import json

import pytest
from click.testing import CliRunner

from connrisk.cli import main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def run_bundle(tmp_path_factory, runner):
    out = tmp_path_factory.mktemp("cli") / "tactical"
    result = runner.invoke(main, [
        "run", "--stage", "tactical", "--seed", "7", "--rows", "6000",
        "--gmm-k", "15", "--rounds", "10", "--depth", "4",
        "--no-figures", "--out", str(out), "--json",
    ])
    assert result.exit_code == 0, result.output
    return out, json.loads(result.output)


class TestSynth:
    def test_writes_csv(self, runner, tmp_path):
        out = tmp_path / "data.csv"
        result = runner.invoke(main, ["synth", "--seed", "1", "--rows", "800",
                                      "--out", str(out), "--json"])
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["rows"] == 800
        assert out.exists()
        assert len(out.read_text(encoding="utf-8").splitlines()) == 801


class TestRun:
    def test_bundle_written(self, run_bundle):
        out, payload = run_bundle
        assert (out / "report.json").exists()
        assert (out / "model.json").exists()
        assert payload["stage"] == "tactical"
        assert 0 < payload["model_auc_roc"] <= 1

    def test_unknown_stage_usage_error(self, runner, tmp_path):
        result = runner.invoke(main, ["run", "--stage", "bogus", "--out", str(tmp_path / "x")])
        assert result.exit_code == 2

    def test_run_from_csv(self, runner, tmp_path):
        csv_path = tmp_path / "in.csv"
        result = runner.invoke(main, ["synth", "--seed", "3", "--rows", "5000",
                                      "--out", str(csv_path)])
        assert result.exit_code == 0, result.output
        out = tmp_path / "fromcsv"
        result = runner.invoke(main, [
            "run", "--stage", "strategic", "--csv", str(csv_path),
            "--gmm-k", "10", "--rounds", "6", "--depth", "3",
            "--no-figures", "--out", str(out), "--json",
        ])
        assert result.exit_code == 0, result.output
        assert (out / "report.json").exists()


class TestCost:
    def test_delta_sign_tracks_precision_against_ratio(self, runner, run_bundle):
        out, _ = run_bundle
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        precision = report["model"]["rates_at_selected"]["precision"]
        result = runner.invoke(main, ["cost", "--report", str(out / "report.json"),
                                      "--r", "1.16", "--json"])
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        # delta_c <= 0 exactly when precision >= 1/1.16
        assert (payload["delta_c"] <= 0) == (precision >= 1.0 / 1.16)

    def test_text_verdict(self, runner, run_bundle):
        out, _ = run_bundle
        result = runner.invoke(main, ["cost", "--report", str(out / "report.json"),
                                      "--r", "50.0"])
        assert result.exit_code == 0
        assert "prevention pays" in result.output


class TestBaseline:
    def test_sweep_summary(self, runner, tmp_path):
        out_csv = tmp_path / "sweep.csv"
        result = runner.invoke(main, ["baseline", "--stage", "strategic",
                                      "--rows", "4000", "--seed", "2",
                                      "--out", str(out_csv), "--json"])
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert len(payload["sweep"]) == 51
        assert out_csv.exists()
        header = out_csv.read_text(encoding="utf-8").splitlines()[0]
        assert header == "threshold,TP,FP,TN,FN,tpr,fpr,precision,recall,g_mean,f1"


class TestExplain:
    def test_explains_single_row(self, runner, run_bundle):
        out, _ = run_bundle
        features = {
            "TP From": "TP101", "TP To": "TP301", "Traffic Network": "NS",
            "Dep. Day": 2, "Dep. Month Day": 14, "Sex": "F", "Age": 44,
            "Is Group": False, "Class From": "Y", "Class To": "Y",
            "Perceived Conn. Time": 25,
        }
        result = runner.invoke(main, ["explain", "--model-dir", str(out),
                                      "--features", json.dumps(features), "--json"])
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert 0 <= payload["probability"] <= 1
        total = payload["base_value"] + sum(payload["shap_values"].values())
        assert abs(total - payload["margin"]) <= 1e-6


class TestCompare:
    def test_table_and_outputs(self, runner, run_bundle, tmp_path):
        out, _ = run_bundle
        report = str(out / "report.json")
        out_csv = tmp_path / "cmp.csv"
        out_fig = tmp_path / "cmp.png"
        result = runner.invoke(main, ["compare", report, "--out-csv", str(out_csv),
                                      "--out-figure", str(out_fig)])
        assert result.exit_code == 0, result.output
        assert "tactical" in result.output
        assert "-" in result.output  # gaps for the three missing stages
        assert out_csv.exists()
        assert out_fig.exists()

    def test_json_rows(self, runner, run_bundle):
        out, _ = run_bundle
        result = runner.invoke(main, ["compare", str(out / "report.json"), "--json"])
        rows = json.loads(result.output)
        assert len(rows) == 4
        present = [r for r in rows if r["present"]]
        assert len(present) == 1 and present[0]["stage"] == "tactical"


class TestConfigPrecedence:
    def test_config_file_provides_defaults_flags_override(self, runner, tmp_path):
        config = tmp_path / "conf.json"
        config.write_text(json.dumps({"rows": 300, "seed": 99}), encoding="utf-8")
        out = tmp_path / "synth.csv"
        result = runner.invoke(main, ["synth", "--config", str(config),
                                      "--out", str(out), "--json"])
        assert result.exit_code == 0, result.output
        assert json.loads(result.output)["rows"] == 300
        # explicit flag beats the file
        out2 = tmp_path / "synth2.csv"
        result = runner.invoke(main, ["synth", "--config", str(config), "--rows", "120",
                                      "--out", str(out2), "--json"])
        assert json.loads(result.output)["rows"] == 120

    def test_env_var_beats_file(self, runner, tmp_path, monkeypatch):
        config = tmp_path / "conf.json"
        config.write_text(json.dumps({"rows": 300}), encoding="utf-8")
        out = tmp_path / "synth3.csv"
        result = runner.invoke(main, ["synth", "--config", str(config),
                                      "--out", str(out), "--json"],
                               env={"CONNRISK_SYNTH_ROWS": "150"})
        assert result.exit_code == 0, result.output
        assert json.loads(result.output)["rows"] == 150
