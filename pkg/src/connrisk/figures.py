"""Matplotlib rendering of stage evaluation data to PNG files.

Rendering is a presentation layer over the exported curve/summary data; the
numeric modules never import this. Uses the Agg backend so it works headless.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _curve_panel(ax, ev, kind: str, stage: str):
    if kind == "roc":
        model, auc_m = ev.roc, ev.auc_roc
        base, auc_b = ev.baseline.roc, ev.baseline.auc_roc
        ax.plot([0, 1], [0, 1], ":", color="grey", lw=1)
        ax.set_xlabel("FPR")
        ax.set_ylabel("TPR")
    else:
        model, auc_m = ev.pr, ev.auc_pr
        base, auc_b = ev.baseline.pr, ev.baseline.auc_pr
        ax.set_xlabel("Recall")
        ax.set_ylabel("Precision")
    ax.plot(model.xs, model.ys, lw=1.5, label=f"model (AUC {auc_m:.3f})")
    ax.plot(base.xs, base.ys, lw=1.2, ls="--", label=f"baseline (AUC {auc_b:.3f})")
    ax.set_title(f"{stage}: {kind.upper()}")
    ax.legend(loc="lower right" if kind == "roc" else "lower left", fontsize=8)
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)


def render_stage_figures(out_dir, stage: str, ev) -> list[str]:
    """Write roc.png, pr.png and shap_summary.png under out_dir/figures."""
    out_dir = Path(out_dir)
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    written = []

    for kind in ("roc", "pr"):
        fig, ax = plt.subplots(figsize=(4.5, 4.0), dpi=120)
        _curve_panel(ax, ev, kind, stage)
        fig.tight_layout()
        fig.savefig(fig_dir / f"{kind}.png")
        plt.close(fig)
        written.append(f"figures/{kind}.png")

    written.append(_render_shap_summary(fig_dir, stage, ev.shap_summary))
    return written


def _render_shap_summary(fig_dir: Path, stage: str, summary) -> str:
    """Beeswarm-style scatter: one jittered row per feature, most important on top."""
    order = np.argsort(summary.rank)
    n_features = len(order)
    n_rows = summary.shap_matrix.shape[0]
    sample = np.arange(n_rows)
    if n_rows > 4000:  # rendering cap only; statistics use all rows
        sample = np.random.default_rng(0).choice(n_rows, 4000, replace=False)

    fig, ax = plt.subplots(figsize=(6.5, 0.45 * n_features + 1.5), dpi=120)
    rng = np.random.default_rng(0)
    for y_pos, j in enumerate(order[::-1]):
        phi = summary.shap_matrix[sample, j]
        raw = summary.feature_values[sample, j]
        spread = raw.max() - raw.min()
        color = (raw - raw.min()) / spread if spread > 0 else np.full_like(raw, 0.5)
        jitter = rng.normal(0, 0.08, len(phi))
        ax.scatter(phi, np.full_like(phi, y_pos) + jitter, c=color, cmap="cool",
                   s=4, alpha=0.5, linewidths=0)
    ax.axvline(0.0, color="grey", lw=0.8)
    ax.set_yticks(range(n_features))
    ax.set_yticklabels([summary.feature_names[j] for j in order[::-1]], fontsize=8)
    ax.set_xlabel("attribution (log-odds)")
    ax.set_title(f"{stage}: attribution summary (colour = feature value)")
    fig.tight_layout()
    fig.savefig(fig_dir / "shap_summary.png")
    plt.close(fig)
    return "figures/shap_summary.png"


def render_comparison(path, rows: list[dict]) -> None:
    """Bar chart of model vs baseline ROC AUC across stages."""
    present = [r for r in rows if r.get("present")]
    labels = [r["stage"] for r in present]
    model = [r["model_auc_roc"] for r in present]
    base = [r["baseline_auc_roc"] for r in present]
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(6.0, 3.5), dpi=120)
    ax.bar(x - 0.18, model, width=0.36, label="model")
    ax.bar(x + 0.18, base, width=0.36, label="baseline")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("ROC AUC")
    ax.set_ylim(0.5, 1.0)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
