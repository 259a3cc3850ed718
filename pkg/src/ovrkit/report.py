"""Batch report rendering: text tables, delimited output, and PNG figures.

Figures are written straight to files (Agg backend); nothing opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

METRIC_TITLES = {"macro_f1": "Macro-F1", "micro_f1": "Micro-F1",
                 "instance_f1": "Instance-F1"}


def format_mean_std(mean: float, std: float) -> str:
    return f"{mean:.3f} ±{std:.3f}"


def render_method_table(methods, representations, aggregates,
                        metrics=("macro_f1", "micro_f1")) -> str:
    """Methods-by-representations table, one section per metric."""
    width = max([len(m) for m in methods] + [24])
    col_w = max([len(r) for r in representations] + [14])
    lines = []
    for metric in metrics:
        lines.append(METRIC_TITLES.get(metric, metric))
        header = " " * width + "  " + "  ".join(f"{r:>{col_w}}" for r in representations)
        lines.append(header)
        for method in methods:
            cells = []
            for rep in representations:
                agg = aggregates.get((method, rep), {}).get(metric)
                cells.append(f"{format_mean_std(agg['mean'], agg['std']):>{col_w}}"
                             if agg else " " * col_w)
            lines.append(f"{method:<{width}}  " + "  ".join(cells))
        lines.append("")
    return "\n".join(lines)


def write_results_tsv(records, path) -> None:
    """Long-format delimited results, one row per (method, rep, seed)."""
    metric_keys = ("macro_f1", "micro_f1", "instance_f1", "micro_upper_bound")
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write("method\trepresentation\tseed\t" + "\t".join(metric_keys) + "\n")
        for rec in records:
            cells = "\t".join(repr(rec["metrics"][k]) for k in metric_keys)
            fh.write(f"{rec['method']}\t{rec['representation']}\t{rec['seed']}\t{cells}\n")


def experiment_figure(methods, representations, aggregates, path,
                      metrics=("macro_f1", "micro_f1")) -> None:
    """Grouped bars (mean with std error bars) per metric."""
    fig, axes = plt.subplots(1, len(metrics), figsize=(6 * len(metrics), 4.2),
                             squeeze=False)
    x = np.arange(len(representations))
    bar_w = 0.8 / max(len(methods), 1)
    for ax, metric in zip(axes[0], metrics):
        for mi, method in enumerate(methods):
            means = [aggregates.get((method, rep), {}).get(metric, {}).get("mean", np.nan)
                     for rep in representations]
            stds = [aggregates.get((method, rep), {}).get(metric, {}).get("std", 0.0)
                    for rep in representations]
            ax.bar(x + mi * bar_w, means, bar_w, yerr=stds, capsize=2, label=method)
        ax.set_xticks(x + bar_w * (len(methods) - 1) / 2)
        ax.set_xticklabels(representations, rotation=15)
        ax.set_ylabel(METRIC_TITLES.get(metric, metric))
        ax.set_ylim(0, 1)
        ax.grid(axis="y", alpha=0.3)
    axes[0][-1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(str(path), dpi=150)
    plt.close(fig)


def demo_figure(demo, path) -> None:
    """Micro-F1 vs noise level for each prediction strategy."""
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for strategy, scores in demo.micro.items():
        style = "--" if strategy == "unrealistic" else "-"
        ax.plot(demo.noise_levels, scores, style, marker="o", label=strategy)
    ax.set_xlabel("ranking noise probability")
    ax.set_ylabel("Micro-F1")
    ax.set_ylim(0, 1.05)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(str(path), dpi=150)
    plt.close(fig)
