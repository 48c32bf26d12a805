"""Figure rendering for experiment reports (Agg backend, files only).

Every report path of the CLI writes plot-ready CSV *and* renders the same
data as PNG: shell-decay fans (log2 shell norm against shell index, one
line per direction bin) and singular-direction maps.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .spaces import SHELL_FLOOR


def render_shell_fan(report, path, point_index: int | None = None) -> list[Path]:
    """Per-base-point fan of shell decay curves; returns written paths."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    P, D, M = report.shell_norms.shape
    indices = range(P) if point_index is None else [point_index]
    written = []
    for i in indices:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for j in range(D):
            norms = report.shell_norms[i, j]
            keep = norms > SHELL_FLOOR
            if not keep.any():
                continue
            ax.plot(
                np.arange(M)[keep],
                np.log2(norms[keep]),
                marker="o",
                lw=1.0,
                ms=3,
                label=f"bin {j}" if D <= 8 else None,
            )
        pt = ", ".join(f"{v:.2f}" for v in report.base_points[i])
        ax.set_xlabel("dyadic shell index")
        ax.set_ylabel("log2 shell norm")
        ax.set_title(f"shell decay fan at x = ({pt})")
        if D <= 8:
            ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
        out = path.with_name(path.stem + f"_p{i}" + ".png")
        fig.savefig(out, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(out)
    return written


def render_singular_map(report, path, title: str = "singular directions") -> Path:
    """Heat map of singular flags over (base point, direction bin)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mask = np.asarray(report.singular_mask, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    im = ax.imshow(mask, aspect="auto", cmap="Reds", vmin=0, vmax=1, interpolation="nearest")
    ax.set_xlabel("direction bin")
    ax.set_ylabel("base point index")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.8, label="singular")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return Path(path)


def render_ratio_scatter(values, path, title: str, ylabel: str) -> Path:
    """Scatter of a per-probe scalar diagnostic (ratios, constants)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    vals = np.asarray(values, dtype=float)
    ax.plot(np.arange(len(vals)), vals, "o", ms=4)
    ax.set_xlabel("probe index")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path
