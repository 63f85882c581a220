"""Figure rendering for the CLI report paths.

Metrics stay data-only; these helpers turn the emitted tables into the
two standard pictures: the per-description AUC scatter (candidate vs
baseline, with the y=x and y=0.5 reference lines) and the relative-AUC
training curve. Rendering uses the Agg backend and fixed metadata so the
same data produces the same file.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_PNG_METADATA = {"Software": "metatune"}


def plot_scatter(rows, path: str | Path, x_label: str = "baseline AUC-ROC",
                 y_label: str = "candidate AUC-ROC") -> None:
    """Each dot is one label description; above y=x means the candidate won."""
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    ax.plot([0, 1], [0, 1], color="red", linewidth=1.0, label="y = x")
    ax.axhline(0.5, color="black", linewidth=1.0, label="random guess")
    ax.scatter(
        [r.auc_x for r in rows],
        [r.auc_y for r in rows],
        s=18,
        alpha=0.6,
        color="tab:blue",
        edgecolors="none",
    )
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    ax.legend(loc="lower right", fontsize=8)
    ax.grid(alpha=0.25)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_METADATA)
    plt.close(fig)


def plot_curve(points, path: str | Path, reference_step: int) -> None:
    """Relative mean AUC across checkpoints, anchored at the reference step."""
    steps = [s for s, _ in points]
    rel = [v for _, v in points]
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.plot(steps, rel, marker="o", color="tab:blue")
    ax.axvline(reference_step, color="red", linewidth=0.8, linestyle="--",
               label=f"reference step {reference_step}")
    ax.set_xlabel("training steps")
    ax.set_ylabel("mean AUC-ROC, relative")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.25)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_METADATA)
    plt.close(fig)
