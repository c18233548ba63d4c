"""Matplotlib figures rendered next to the delimited outputs.

Every chart here is a file-only render (Agg backend): the CLI report paths
write a figure beside each CSV so a run can be audited at a glance without
loading the data anywhere.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_similarity_trace(trace_rows, path: str) -> None:
    """Per-frame similarity and window mean with cut markers."""
    xs = [row.frame_index for row in trace_rows if row.similarity is not None]
    sims = [row.similarity for row in trace_rows if row.similarity is not None]
    mean_xs = [row.frame_index for row in trace_rows if row.window_mean is not None]
    means = [row.window_mean for row in trace_rows if row.window_mean is not None]
    cuts = [row.frame_index for row in trace_rows if row.decision == "cut"]
    fig, ax = plt.subplots(figsize=(9, 3.5))
    ax.plot(xs, sims, lw=1.2, label="similarity")
    ax.plot(mean_xs, means, lw=1.0, ls="--", label="window mean")
    for i, x in enumerate(cuts):
        ax.axvline(x, color="crimson", lw=0.8, alpha=0.6,
                   label="cut" if i == 0 else None)
    ax.set_xlabel("frame index")
    ax.set_ylabel("similarity")
    ax.set_ylim(0.0, 1.05)
    ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_confusion_matrix(confusion: dict, label_names: list[str],
                          path: str, title: str = "confusion") -> None:
    """Heatmap of a (true, predicted) -> count mapping."""
    n = len(label_names)
    grid = np.zeros((n, n))
    for (true_label, predicted), count in confusion.items():
        grid[label_names.index(true_label), label_names.index(predicted)] = count
    fig, ax = plt.subplots(figsize=(1.2 * n + 2.0, 1.2 * n + 1.5))
    im = ax.imshow(grid, cmap="Blues")
    ax.set_xticks(range(n), label_names, rotation=30, ha="right")
    ax.set_yticks(range(n), label_names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title)
    for r in range(n):
        for c in range(n):
            ax.text(c, r, f"{int(grid[r, c])}", ha="center", va="center",
                    color="black" if grid[r, c] < grid.max() / 2 + 0.5 else "white")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_reduction_chart(clip_ids: list[str], ratios: list[float],
                         overall: float, path: str) -> None:
    """Per-clip reduction ratios with the corpus-wide ratio overlaid."""
    fig, ax = plt.subplots(figsize=(max(6.0, 0.45 * len(clip_ids)), 3.5))
    ax.bar(range(len(clip_ids)), ratios, color="steelblue")
    ax.axhline(overall, color="crimson", lw=1.2, ls="--",
               label=f"corpus {overall:.3f}")
    ax.set_xticks(range(len(clip_ids)), clip_ids, rotation=60, ha="right",
                  fontsize=7)
    ax.set_ylabel("reduction ratio")
    ax.set_ylim(0.0, 1.0)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
