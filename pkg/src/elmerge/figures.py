"""Figure rendering for benchmark reports.

Charts are written next to the JSON/CSV report files so a run leaves a
self-contained directory of artifacts.  Rendering is headless (Agg).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import BenchReport

_BAR_COLORS = ("#4878a8", "#e49444", "#6a9f58")


def _bar_axes(title, ylabel):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    ax.grid(axis="y", alpha=0.3)
    ax.set_axisbelow(True)
    return fig, ax


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_report_figures(report: BenchReport, out_prefix) -> list[Path]:
    """Write time/error/weight-gap charts for a report; returns the paths."""
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    methods = [run.method for run in report.runs]
    colors = [_BAR_COLORS[i % len(_BAR_COLORS)] for i in range(len(methods))]
    written = []

    fig, ax = _bar_axes(f"{report.dataset}: training wall time", "seconds")
    times = [run.time_s for run in report.runs]
    ax.bar(methods, times, color=colors)
    for i, t in enumerate(times):
        ax.annotate(f"{t:.3g}", (i, t), ha="center", va="bottom", fontsize=8)
    written.append(_save(fig, prefix.with_name(prefix.name + "_times.png")))

    fig, ax = _bar_axes(f"{report.dataset}: test error", "error (%)")
    errors = [run.error_pct for run in report.runs]
    ax.bar(methods, errors, color=colors)
    for i, e in enumerate(errors):
        ax.annotate(f"{e:.2f}", (i, e), ha="center", va="bottom", fontsize=8)
    written.append(_save(fig, prefix.with_name(prefix.name + "_error.png")))

    gaps = [(run.method, run.frob_diff) for run in report.runs if run.method != "direct"]
    if gaps:
        fig, ax = _bar_axes(
            f"{report.dataset}: weight distance from direct solve", "Frobenius norm"
        )
        floor = 1e-300
        ax.bar(
            [m for m, _ in gaps],
            [max(g, floor) for _, g in gaps],
            color=colors[1 : 1 + len(gaps)],
        )
        ax.set_yscale("log")
        for i, (_, g) in enumerate(gaps):
            ax.annotate(f"{g:.2e}", (i, max(g, floor)), ha="center", va="bottom", fontsize=8)
        written.append(_save(fig, prefix.with_name(prefix.name + "_weight_diff.png")))

    return written
