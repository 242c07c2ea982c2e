"""Matplotlib figure rendering for the report paths of the CLI."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pipeline import BenchmarkTable
from .segmentation import ANATOMICAL_ORDER, SegmentationResult

_BOUNDARY_COLORS = {
    "ILM": "tab:green",
    "NFL_GCL": "tab:orange",
    "IPL_INL": "tab:purple",
    "INL_OPL": "tab:cyan",
    "OPL_ONL": "tab:red",
    "RPE": "tab:blue",
}


def render_bscan(path: str | Path, scan: np.ndarray, result: SegmentationResult,
                 title: str | None = None) -> None:
    """B-scan with its segmented boundaries overlaid, saved as an image file."""
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.imshow(np.log1p(scan), cmap="gray", aspect="auto", interpolation="nearest")
    for name in ANATOMICAL_ORDER:
        if name not in result.boundaries:
            continue
        depths = result.boundaries[name].depths
        label = name.value
        if name in result.carried_over:
            label += " (carried)"
        ax.plot(np.arange(depths.size), depths, lw=1.0,
                color=_BOUNDARY_COLORS[name.value], label=label)
    ax.set_xlabel("A-line")
    ax.set_ylabel("depth (px)")
    if title:
        ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def render_benchmark(path: str | Path, table: BenchmarkTable) -> None:
    """Accumulated per-stage latency with per-stage error bars."""
    stages = [row.stage for row in table.rows]
    accumulated = [row.accumulated_mean_ms for row in table.rows]
    stds = [row.std_ms for row in table.rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.errorbar(range(len(stages)), accumulated, yerr=stds, marker="o",
                capsize=3, color="tab:blue")
    ax.set_xticks(range(len(stages)))
    ax.set_xticklabels(stages, rotation=30, ha="right")
    ax.set_ylabel("accumulated mean (ms)")
    ax.set_title(f"{table.height}x{table.width}, {table.repetitions} repetitions")
    ax.grid(True, alpha=0.3)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
