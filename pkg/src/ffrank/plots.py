"""Figure rendering for the reporting paths.

Every CLI report command can drop a PNG next to its delimited output;
these helpers own the matplotlib usage so the rest of the package never
imports it.  The Agg backend is forced: figures go to files, never to a
display.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import LatencyReport, MetricReport


def save_metric_figure(report: MetricReport, path: str) -> str:
    """Bar chart of per-query values for each metric, mean drawn as a line."""
    metrics = list(report.per_query)
    fig, axes = plt.subplots(
        len(metrics), 1, figsize=(8, 2.2 * max(len(metrics), 1)), squeeze=False
    )
    for ax, metric in zip(axes[:, 0], metrics):
        values = report.per_query[metric]
        qids = sorted(values)
        ax.bar(range(len(qids)), [values[q] for q in qids], color="#4878a8")
        ax.axhline(report.means[metric], color="#c44e52", linestyle="--", linewidth=1,
                   label=f"mean={report.means[metric]:.4f}")
        ax.set_ylabel(metric)
        ax.set_ylim(0, 1.05)
        ax.set_xticks(range(len(qids)))
        ax.set_xticklabels(qids, rotation=45, ha="right", fontsize=7)
        ax.legend(loc="upper right", fontsize=8)
    axes[-1, 0].set_xlabel("query")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_latency_figure(report: LatencyReport, path: str) -> str:
    """Horizontal bars of per-stage mean latency."""
    stages = list(report.stage_ms)
    fig, ax = plt.subplots(figsize=(7, 2.5))
    ax.barh(range(len(stages)), [report.stage_ms[s] for s in stages], color="#4878a8")
    ax.set_yticks(range(len(stages)))
    ax.set_yticklabels(stages)
    ax.invert_yaxis()
    ax.set_xlabel("mean ms per query")
    ax.set_title(f"best of {report.repeats} runs, {report.queries} queries, "
                 f"{report.lookups} lookups ({report.mode})", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_curve_figure(
    xs: Sequence[float],
    series: Mapping[str, Sequence[float]],
    path: str,
    *,
    xlabel: str,
    ylabel: str,
    title: str = "",
    logx: bool = False,
) -> str:
    """Generic x-vs-y curves, one line per named series."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, ys in series.items():
        ax.plot(xs, ys, marker="o", label=name)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
