"""Figure rendering for benchmark reports (Agg backend, files only)."""
from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)


def metric_boxplot(report, metric: str, path) -> None:
    """Per-method distribution of a metric across repetitions."""
    methods = report.methods
    samples = [[r.metric(metric) for r in report.rows if r.method == m] for m in methods]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(methods)), 3.6))
    ax.boxplot(samples, tick_labels=methods)
    ax.set_ylabel(metric)
    ax.set_title(f"{report.provenance.get('dataset', '')} — {metric} over {report.repetitions} repetitions")
    ax.tick_params(axis="x", rotation=45)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def sweep_lines(reports, metric: str, path) -> None:
    """Mean metric per method as a function of the kernel scale gamma."""
    gammas = [r.provenance.get("gamma") for r in reports]
    methods = reports[0].methods
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for method in methods:
        means = [r.aggregates[method][metric]["mean"] for r in reports]
        ax.plot(gammas, means, marker="o", label=method)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("gamma")
    ax.set_ylabel(f"mean {metric}")
    ax.set_title(f"{reports[0].provenance.get('dataset', '')} — {metric} vs gamma")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def accuracy_agreement_scatter(report, path) -> None:
    """Mean accuracy vs mean base-model agreement, one point per method."""
    methods = report.methods
    fig, ax = plt.subplots(figsize=(4.8, 3.8))
    for method in methods:
        agg = report.aggregates[method]
        if "agreement" not in agg:
            continue
        x, y = agg["agreement"]["mean"], agg["acc"]["mean"]
        ax.scatter([x], [y], s=45)
        ax.annotate(method, (x, y), textcoords="offset points", xytext=(5, 3), fontsize=8)
    ax.set_xlabel("mean base-model agreement")
    ax.set_ylabel("mean accuracy")
    ax.set_title(report.provenance.get("dataset", ""))
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def win_matrix_heatmap(methods, matrix, metric: str, path) -> None:
    """Annotated heatmap of pairwise win proportions."""
    matrix = np.asarray(matrix)
    n = len(methods)
    fig, ax = plt.subplots(figsize=(1.0 + 0.75 * n, 0.9 + 0.65 * n))
    image = ax.imshow(matrix, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(n), methods, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(n), methods, fontsize=8)
    for i in range(n):
        for j in range(n):
            value = matrix[i, j]
            color = "white" if value < 0.5 else "black"
            ax.text(j, i, f"{value:.2f}", ha="center", va="center", fontsize=7, color=color)
    ax.set_title(f"row beats column ({metric})", fontsize=9)
    fig.colorbar(image, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
