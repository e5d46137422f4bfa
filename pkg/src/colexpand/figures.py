"""Matplotlib rendering for evaluation reports and parameter sweeps."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluator import METRIC_KEYS, MetricReport

PathLike = Union[str, Path]

_LABELS = {
    "em": "EM",
    "word_f1": "word F1",
    "embed_f1": "embed F1",
    "syn_em": "syn EM",
    "syn_word_f1": "syn word F1",
    "syn_embed_f1": "syn embed F1",
}


def save_metric_bars(report: MetricReport, path: PathLike) -> None:
    """Bar chart of the six aggregate metrics, in percent."""
    values = [report.aggregates[key] * 100 for key in METRIC_KEYS]
    labels = [_LABELS[key] for key in METRIC_KEYS]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    bars = ax.bar(labels, values, color=["#4878b0"] * 3 + ["#5da05d"] * 3)
    ax.set_ylim(0, 100)
    ax.set_ylabel("accuracy (%)")
    ax.set_title(
        f"expansion accuracy over {report.evaluated_count} columns "
        f"({report.excluded_count} excluded)"
    )
    for bar, value in zip(bars, values):
        ax.annotate(
            f"{value:.1f}",
            xy=(bar.get_x() + bar.get_width() / 2, value),
            xytext=(0, 3),
            textcoords="offset points",
            ha="center",
            fontsize=8,
        )
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_lines(rows: Sequence[dict], parameter: str, path: PathLike) -> None:
    """Metric-vs-parameter lines over the successful sweep rows."""
    ok_rows = [row for row in rows if row.get("status") == "ok"]
    if not ok_rows:
        raise ValueError("no successful sweep rows to plot")
    values = [row["value"] for row in ok_rows]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for key in METRIC_KEYS:
        series = [row["metrics"][key] * 100 for row in ok_rows]
        ax.plot(values, series, marker="o", label=_LABELS[key])
    ax.set_xlabel(parameter)
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 100)
    ax.set_title(f"accuracy as {parameter} varies")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
