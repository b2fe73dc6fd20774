"""Command-line workflow: synth, run, baseline, explain, cost, compare, serve.

Option precedence is flags > environment (CONNRISK_*) > --config file >
built-in defaults. Commands print human-readable text by default; --json
switches stdout to machine-readable JSON.
"""
from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np

from . import gbdt
from .baseline import evaluate_baseline
from .cost import CostParameters, cost_report
from .domain import DsmStage, feature_frame, stage_features, stage_time_feature
from .metrics import ConfusionCounts
from .pipeline import GmmConfig, RunConfig, compare_stages, run_stage
from .synthgen import SynthConfig, generate, ingest_csv, listwise_delete, minority_fraction, write_csv

STAGE_CHOICES = click.Choice([s.value for s in DsmStage])


def _load_config_file(ctx, param, value):
    """--config FILE provides defaults; flags and env vars override it."""
    if value:
        defaults = json.loads(Path(value).read_text(encoding="utf-8"))
        ctx.default_map = {**defaults, **(ctx.default_map or {})}
    return value


CONFIG_OPTION = click.option(
    "--config", type=click.Path(exists=True, dir_okay=False), callback=_load_config_file,
    is_eager=True, expose_value=False, help="JSON file with option defaults.")


def _emit(payload: dict, as_json: bool, text: str):
    if as_json:
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(text)


@click.group(context_settings={"auto_envvar_prefix": "CONNRISK"})
def main():
    """Decision-support models for missed flight-connection risk."""


@main.command()
@CONFIG_OPTION
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--rows", type=int, default=20_000, show_default=True)
@click.option("--minority-frac", type=float, default=0.0585, show_default=True)
@click.option("--missingness", type=float, default=0.005, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--json", "as_json", is_flag=True)
def synth(seed, rows, minority_frac, missingness, out, as_json):
    """Generate a seeded synthetic connection dataset as CSV."""
    config = SynthConfig(seed=seed, n_rows=rows, target_minority_fraction=minority_frac,
                         missingness_rate=missingness)
    records = generate(config)
    write_csv(records, out)
    frac = minority_fraction(records)
    _emit({"rows": len(records), "minority_fraction": frac, "path": str(out)},
          as_json, f"wrote {len(records)} rows to {out} (minority {frac:.4f})")


def _run_config(stage, csv, seed, rows, minority_frac, test_fraction, gmm_k, gmm_candidates,
                bic_standard, rounds, depth, learning_rate, r, shap_rows, figures) -> RunConfig:
    synth_cfg = None if csv else SynthConfig(seed=seed, n_rows=rows,
                                             target_minority_fraction=minority_frac)
    candidates = tuple(int(k) for k in gmm_candidates.split(",")) if gmm_candidates else None
    return RunConfig(
        stage=DsmStage(stage),
        synth=synth_cfg,
        csv_path=csv,
        seed=seed,
        test_fraction=test_fraction,
        gmm=GmmConfig(components=gmm_k, select_candidates=candidates,
                      standard_bic=bic_standard),
        boost=gbdt.BoostConfig(n_rounds=rounds, max_depth=depth, learning_rate=learning_rate),
        cost_ratio=r,
        shap_rows=shap_rows,
        render_figures=figures,
    )


@main.command()
@CONFIG_OPTION
@click.option("--stage", type=STAGE_CHOICES, required=True)
@click.option("--csv", type=click.Path(exists=True, dir_okay=False),
              help="Ingest this CSV instead of generating synthetic data.")
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--rows", type=int, default=20_000, show_default=True,
              help="Synthetic rows when no --csv is given.")
@click.option("--minority-frac", type=float, default=0.0585, show_default=True)
@click.option("--test-fraction", type=float, default=0.10, show_default=True)
@click.option("--gmm-k", type=int, default=200, show_default=True)
@click.option("--gmm-candidates", type=str, default=None,
              help="Comma-separated K values; picks the best by information criterion.")
@click.option("--bic-standard", is_flag=True,
              help="Use the textbook K log N BIC penalty instead of the doubled one.")
@click.option("--rounds", type=int, default=200, show_default=True)
@click.option("--depth", type=int, default=15, show_default=True)
@click.option("--learning-rate", type=float, default=0.4, show_default=True)
@click.option("--r", type=float, default=2.0, show_default=True,
              help="Reaction/prevention cost ratio for the cost analysis.")
@click.option("--shap-rows", type=int, default=None,
              help="Cap SHAP summary rows (default: full test split).")
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--json", "as_json", is_flag=True)
def run(stage, csv, seed, rows, minority_frac, test_fraction, gmm_k, gmm_candidates,
        bic_standard, rounds, depth, learning_rate, r, shap_rows, figures, out, as_json):
    """Run one decision stage end to end and write its bundle."""
    config = _run_config(stage, csv, seed, rows, minority_frac, test_fraction, gmm_k,
                         gmm_candidates, bic_standard, rounds, depth, learning_rate,
                         r, shap_rows, figures)
    report = run_stage(config, out)
    d = report.to_dict()
    summary = {
        "stage": d["stage"], "out": str(out),
        "model_auc_roc": d["model"]["auc_roc"],
        "baseline_auc_roc": d["baseline"]["auc_roc"],
        "g_mean": d["model"]["best_g_mean"]["value"],
        "f1": d["model"]["best_f1"]["value"],
        "r_min": d["cost"]["r_min"],
    }
    _emit(summary, as_json,
          f"{d['stage']}: model AUC_ROC {d['model']['auc_roc']:.4f} "
          f"(baseline {d['baseline']['auc_roc']:.4f}); bundle in {out}")


@main.command()
@CONFIG_OPTION
@click.option("--stage", type=STAGE_CHOICES, required=True)
@click.option("--csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--rows", type=int, default=20_000, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the sweep table CSV here.")
@click.option("--json", "as_json", is_flag=True)
def baseline(stage, csv, seed, rows, out, as_json):
    """Evaluate the threshold-sweep baseline for one stage."""
    stage = DsmStage(stage)
    if csv:
        records = ingest_csv(csv, stage).records
    else:
        records = generate(SynthConfig(seed=seed, n_rows=rows))
    features = stage_features(stage)
    kept, _ = listwise_delete(records, features)
    time_feature = stage_time_feature(stage)
    frame = feature_frame(kept, (time_feature,))
    labels = np.array([r.missed for r in kept], dtype=bool)
    report = evaluate_baseline(np.asarray(frame[time_feature], dtype=float), labels, time_feature)
    if out:
        from .pipeline import write_sweep_csv
        write_sweep_csv(Path(out), report)
    payload = report.to_dict()
    best = payload["best_g_mean"]
    _emit(payload, as_json,
          f"{stage.value} baseline on {time_feature}: AUC_ROC {report.auc_roc:.4f}, "
          f"best g-mean {best['value']:.4f} at {best['threshold']} min "
          f"(60-min row: g-mean {report.mct_row.rates.g_mean:.4f})")


@main.command()
@CONFIG_OPTION
@click.option("--model-dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--features", "features_json", type=str, required=True,
              help="JSON feature map in canonical column names and raw units.")
@click.option("--json", "as_json", is_flag=True)
def explain(model_dir, features_json, as_json):
    """Predict and explain one connection against a persisted bundle."""
    from .service import ModelSnapshot
    snapshot = ModelSnapshot.load(model_dir)
    features = json.loads(features_json)
    result = snapshot.predict(features)
    ranked = sorted(result["shap_values"].items(), key=lambda kv: -abs(kv[1]))
    text = [f"p(missed) = {result['probability']:.4f} "
            f"(threshold {result['threshold']:.4f} -> "
            f"{'MISS' if result['predicted_missed'] else 'OK'})"]
    text += [f"  {name:<22} {value:+.4f}" for name, value in ranked]
    _emit(result, as_json, "\n".join(text))


@main.command()
@CONFIG_OPTION
@click.option("--report", "report_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="report.json from a stage run.")
@click.option("--r", type=float, required=True)
@click.option("--c-prev", type=float, default=1.0, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def cost(report_path, r, c_prev, as_json):
    """Recompute the operational cost verdict at a given cost ratio."""
    report = json.loads(Path(report_path).read_text(encoding="utf-8"))
    counts = ConfusionCounts(**report["model"]["counts_at_selected"])
    preventable = report["stage"] != DsmStage.POST_OPERATIONS.value
    analysis = cost_report(counts, CostParameters(c_prev=c_prev, r=r), preventable=preventable)
    payload = analysis.to_dict()
    if not analysis.applicable:
        _emit(payload, as_json, "post-operations runs admit no preventive action; "
                                "cost analysis not applicable")
        return
    verdict = "prevention pays" if analysis.delta_c < 0 else "prevention does not pay"
    _emit(payload, as_json,
          f"delta_c = {analysis.delta_c:.2f} (r = {r}, r_min = {analysis.r_min:.4f}): {verdict}")


@main.command()
@CONFIG_OPTION
@click.argument("report_paths", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--out-csv", type=click.Path(dir_okay=False), default=None)
@click.option("--out-figure", type=click.Path(dir_okay=False), default=None)
@click.option("--json", "as_json", is_flag=True)
def compare(report_paths, out_csv, out_figure, as_json):
    """Tabulate several stage reports side by side."""
    reports = [json.loads(Path(p).read_text(encoding="utf-8")) for p in report_paths]
    rows = compare_stages(reports)
    if out_csv:
        import csv as _csv
        with Path(out_csv).open("w", newline="", encoding="utf-8") as fh:
            writer = _csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    if out_figure:
        from .figures import render_comparison
        render_comparison(out_figure, rows)
    if as_json:
        click.echo(json.dumps(rows, sort_keys=True))
        return
    header = f"{'stage':<16} {'model AUC':>10} {'baseline':>10} {'g-mean':>8} {'f1':>8} {'r_min':>7}"
    lines = [header, "-" * len(header)]
    for row in rows:
        if not row["present"]:
            lines.append(f"{row['stage']:<16} {'-':>10} {'-':>10} {'-':>8} {'-':>8} {'-':>7}")
            continue
        r_min = "-" if row["r_min"] is None else f"{row['r_min']:.3f}"
        lines.append(f"{row['stage']:<16} {row['model_auc_roc']:>10.4f} "
                     f"{row['baseline_auc_roc']:>10.4f} {row['g_mean']:>8.4f} "
                     f"{row['f1']:>8.4f} {r_min:>7}")
    click.echo("\n".join(lines))


@main.command()
@CONFIG_OPTION
@click.option("--model-dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--ui-dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Serve a static what-if UI bundle at /.")
def serve(model_dir, host, port, ui_dir):
    """Serve predictions and explanations over HTTP."""
    import uvicorn

    from .service import create_app
    app = create_app(bundle_dir=model_dir, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
