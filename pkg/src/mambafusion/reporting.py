"""Report emission: delimited outputs plus matplotlib figures.

Every report path writes deterministic CSV/JSON; next to each report a
PNG figure is rendered (bar charts for metric means and average ranks, a
curve for training losses) unless figures are disabled.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import METRIC_NAMES


def write_metrics_report(report_path, per_image: list[dict], figure: bool = True):
    """Per-image metric rows + a mean row, as CSV, JSON and a bar figure.

    ``per_image`` rows carry 'name' plus the seven metric values. Returns
    the paths written.
    """
    report_path = Path(report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    means = {m: sum(r[m] for r in per_image) / len(per_image) for m in METRIC_NAMES}

    csv_path = report_path if report_path.suffix == ".csv" else report_path.with_suffix(".csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", *METRIC_NAMES])
        for row in per_image:
            writer.writerow([row["name"], *(f"{row[m]:.6f}" for m in METRIC_NAMES)])
        writer.writerow(["mean", *(f"{means[m]:.6f}" for m in METRIC_NAMES)])

    json_path = csv_path.with_suffix(".json")
    payload = {
        "per_image": [{k: row[k] for k in ("name", *METRIC_NAMES)} for row in per_image],
        "mean": means,
    }
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    paths = [csv_path, json_path]
    if figure:
        fig_path = csv_path.with_suffix(".png")
        fig, axes = plt.subplots(1, len(METRIC_NAMES), figsize=(3 * len(METRIC_NAMES), 3.2))
        for ax, m in zip(axes, METRIC_NAMES):
            ax.bar([0], [means[m]], color="#336699")
            ax.set_title(m)
            ax.set_xticks([])
        fig.suptitle("fusion metric means")
        fig.tight_layout()
        fig.savefig(fig_path, dpi=110)
        plt.close(fig)
        paths.append(fig_path)
    return paths


def write_rank_figure(fig_path, methods, avg_ranks):
    """Horizontal bar chart of average ranks, best (lowest) on top."""
    order = sorted(range(len(methods)), key=lambda i: avg_ranks[i])
    fig, ax = plt.subplots(figsize=(7, 0.4 * len(methods) + 1.5))
    ax.barh(
        [len(order) - 1 - k for k in range(len(order))],
        [avg_ranks[i] for i in order],
        color="#884422",
    )
    ax.set_yticks([len(order) - 1 - k for k in range(len(order))])
    ax.set_yticklabels([methods[i] for i in order])
    ax.set_xlabel("average rank (lower is better)")
    fig.tight_layout()
    fig.savefig(fig_path, dpi=110)
    plt.close(fig)
    return Path(fig_path)


def write_loss_figure(fig_path, history):
    """Loss-curve figure from training history rows."""
    iters = [row["iter"] for row in history]
    fig, ax = plt.subplots(figsize=(7, 4))
    for key, color in (("l_total", "k"), ("l_f", "#336699"), ("l_v", "#669933"), ("l_i", "#993333")):
        ax.plot(iters, [row[key] for row in history], color=color, label=key, linewidth=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(fig_path, dpi=110)
    plt.close(fig)
    return Path(fig_path)
