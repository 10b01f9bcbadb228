"""Matplotlib renderings of the report outputs.

Figures are a convenience layer next to the delimited files: the CSV/JSONL
records stay the source of truth, and every renderer takes the already
computed data. The Agg backend is forced so rendering works headless, and
PNG metadata is pinned so repeated runs produce identical bytes.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_PNG_METADATA = {"Software": "typicalgen"}

# Metrics worth a panel in the strategy-comparison chart, with display range hints.
_COMPARISON_FIELDS = ("rep", "diversity", "zipf", "eps_mean", "ppl_g", "ppl_i")


def save_epsilon_histogram(
    histogram: Sequence[tuple[float, float, int]],
    mean: float,
    path,
    title: str = "Per-token |entropy - surprisal| distribution",
) -> None:
    """Bar plot of the deviation histogram with a dashed line at the mean."""
    finite = [(lo, hi, c) for lo, hi, c in histogram if math.isfinite(hi)]
    overflow = sum(c for lo, hi, c in histogram if not math.isfinite(hi))
    lefts = [lo for lo, _, _ in finite]
    widths = [hi - lo for lo, hi, _ in finite]
    counts = [c for _, _, c in finite]

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(lefts, counts, width=widths, align="edge", color="#4878a8", edgecolor="none")
    ax.axvline(mean, color="#333333", linestyle="--", linewidth=1.2)
    ax.annotate(
        f"mean = {mean:.3f} nats",
        xy=(mean, 1.0),
        xycoords=("data", "axes fraction"),
        xytext=(6, -12),
        textcoords="offset points",
        fontsize=9,
    )
    if overflow:
        ax.annotate(
            f"overflow (> {finite[-1][1]:g}): {overflow}",
            xy=(0.98, 0.9),
            xycoords="axes fraction",
            ha="right",
            fontsize=8,
        )
    ax.set_xlabel("|entropy - surprisal|  (nats)")
    ax.set_ylabel("tokens")
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_METADATA)
    plt.close(fig)


def save_strategy_comparison(
    rows: Sequence[tuple[str, Mapping[str, float]]],
    path,
) -> None:
    """Small-multiples bar chart comparing metric values across strategies.

    ``rows`` pairs a strategy label with its metric mapping (the comparison
    table's columns); missing fields are skipped per panel.
    """
    fields = [f for f in _COMPARISON_FIELDS if any(f in m for _, m in rows)]
    if not fields or not rows:
        raise ValueError("nothing to plot")
    ncols = 3
    nrows = math.ceil(len(fields) / ncols)
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.4 * ncols, 2.6 * nrows), squeeze=False)
    labels = [label for label, _ in rows]
    xs = range(len(labels))
    for i, metric in enumerate(fields):
        ax = axes[i // ncols][i % ncols]
        values = [m.get(metric, float("nan")) for _, m in rows]
        ax.bar(xs, values, color="#4878a8")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=7)
        ax.set_title(metric, fontsize=9)
    for j in range(len(fields), nrows * ncols):
        axes[j // ncols][j % ncols].set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_METADATA)
    plt.close(fig)
