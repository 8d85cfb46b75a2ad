"""Matplotlib figure rendering for report outputs.

Every function writes a PNG next to the delimited exports.  The Agg
backend is forced and PNG metadata is pinned so identical inputs produce
identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = dict(dpi=150, metadata={"Software": "revfield"})


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def heatmap_png(
    values: np.ndarray,
    extent: tuple[float, float],
    path: str | Path,
    label: str = "",
    edges: np.ndarray | None = None,
) -> Path:
    """Grayscale map with s horizontal and t increasing downward; optional
    edge flags drawn as points."""
    I, J = extent
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    im = ax.imshow(
        np.asarray(values).T,
        cmap="gray",
        aspect="auto",
        origin="upper",
        extent=(0.0, I or 1.0, J or 1.0, 0.0),
        interpolation="nearest",
    )
    if edges is not None and edges.any():
        S, T = edges.shape
        ii, jj = np.nonzero(edges)
        s = ii / max(S - 1, 1) * (I or 1.0)
        t = jj / max(T - 1, 1) * (J or 1.0)
        ax.plot(s, t, ".", color="#d62728", markersize=3)
    ax.set_xlabel("s")
    ax.set_ylabel("t")
    if label:
        ax.set_title(label)
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    return _finish(fig, path)


def curves_png(
    s_coords: np.ndarray,
    h_curve: np.ndarray,
    t_coords: np.ndarray,
    g_curve: np.ndarray,
    path: str | Path,
) -> Path:
    """Side-by-side h(s) and g(t) line plots."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.2))
    ax1.plot(s_coords, h_curve, lw=1.2)
    ax1.set_xlabel("s")
    ax1.set_ylabel("h(s)")
    ax2.plot(t_coords, g_curve, lw=1.2, color="#ff7f0e")
    ax2.set_xlabel("t")
    ax2.set_ylabel("g(t)")
    for ax in (ax1, ax2):
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _finish(fig, path)


def segmentation_png(
    assignment: np.ndarray,
    extent: tuple[float, float],
    k: int,
    path: str | Path,
) -> Path:
    I, J = extent
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.imshow(
        assignment.T,
        cmap="tab20" if k > 10 else "tab10",
        aspect="auto",
        origin="upper",
        extent=(0.0, I or 1.0, J or 1.0, 0.0),
        interpolation="nearest",
        vmin=0,
        vmax=max(k - 1, 1),
    )
    ax.set_xlabel("s")
    ax.set_ylabel("t")
    ax.set_title(f"segments (k={k})")
    fig.tight_layout()
    return _finish(fig, path)


def report_bar_png(rows: list[dict], path: str | Path) -> Path:
    """Grouped accuracy/F1 bars per method for each report row."""
    methods = ("a", "b", "c")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.4))
    x = np.arange(len(rows))
    width = 0.25
    for mi, m in enumerate(methods):
        ax1.bar(
            x + (mi - 1) * width,
            [r["accuracy"][m] for r in rows],
            width,
            label=f"method {m}",
        )
        ax2.bar(x + (mi - 1) * width, [r["f1"][m] for r in rows], width)
    for ax, title in ((ax1, "accuracy"), (ax2, "F1")):
        ax.set_xticks(x)
        ax.set_xticklabels([str(r["article"]) for r in rows], rotation=20)
        ax.set_ylim(0, 1.05)
        ax.set_title(title)
        ax.grid(True, axis="y", alpha=0.3)
    ax1.legend(fontsize=8)
    fig.tight_layout()
    return _finish(fig, path)
