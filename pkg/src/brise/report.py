"""Figure rendering for simulation output and rank structure.

All figures go straight to files through the Agg backend, so rendering
works in headless runs and never opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .rankgraph import RankMatrix

__all__ = [
    "render_pvalue_histogram",
    "render_power_curve",
    "render_rank_heatmap",
]


def render_pvalue_histogram(rows: list, path, alpha: float = 0.05) -> None:
    """Histogram of replicate p-values with the uniform reference line."""
    p_values = [r["p_value"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.linspace(0.0, 1.0, 21)
    ax.hist(p_values, bins=bins, density=True, color="#4878a8", edgecolor="white")
    ax.axhline(1.0, color="#333333", linestyle="--", linewidth=1, label="uniform")
    ax.axvline(alpha, color="#a84848", linewidth=1, label=f"alpha = {alpha:g}")
    ax.set_xlabel("p-value")
    ax.set_ylabel("density")
    ax.set_title(f"{len(rows)} replicates")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_power_curve(rows: list, path, alpha: float = 0.05) -> None:
    """Rejection rate against the shared sampling rate, one line per method."""
    cells: dict = {}
    for r in rows:
        cells.setdefault((r["method"], float(r["p_x"])), []).append(r["reject"])
    methods = sorted({m for m, _ in cells})
    fig, ax = plt.subplots(figsize=(6, 4))
    for method in methods:
        rates = sorted(p for m, p in cells if m == method)
        power = [np.mean(cells[(method, p)]) for p in rates]
        ax.plot(rates, power, marker="o", label=method)
    ax.axhline(alpha, color="#888888", linestyle=":", linewidth=1)
    ax.set_xlabel("sampling rate p")
    ax.set_ylabel("rejection rate")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_rank_heatmap(R: RankMatrix, path, report_ids=None) -> None:
    """Symmetrized rank matrix with pattern boundaries drawn in."""
    n_pat = R.n_patterns
    if report_ids is None:
        report_ids = list(range(n_pat))
    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(R.values, cmap="viridis", interpolation="nearest")
    for a in range(1, n_pat):
        edge = R.offsets[a] - 0.5
        ax.axhline(edge, color="white", linewidth=0.8)
        ax.axvline(edge, color="white", linewidth=0.8)
    centers = [(R.offsets[a] + R.offsets[a + 1]) / 2 for a in range(n_pat)]
    ax.set_xticks(centers, [str(report_ids[a]) for a in range(n_pat)])
    ax.set_yticks(centers, [str(report_ids[a]) for a in range(n_pat)])
    ax.set_xlabel("pattern")
    ax.set_ylabel("pattern")
    fig.colorbar(im, ax=ax, label="rank")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
