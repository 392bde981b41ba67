"""Figures rendered next to the tabular outputs of the CLI."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_sweep(rows, axis_name: str, path) -> None:
    """Mean C-index per variant over the sweep axis, with a std band.

    ``rows`` are (value, variant, rep, cindex) tuples.
    """
    variants = sorted({r[1] for r in rows})
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for variant in variants:
        values = sorted({r[0] for r in rows if r[1] == variant})
        means, stds = [], []
        for value in values:
            scores = np.array([r[3] for r in rows if r[1] == variant and r[0] == value])
            means.append(scores.mean())
            stds.append(scores.std())
        means = np.array(means)
        stds = np.array(stds)
        ax.plot(values, means, marker="o", label=variant)
        ax.fill_between(values, means - stds, means + stds, alpha=0.15)
    ax.set_xlabel(axis_name)
    ax.set_ylabel("test C-index")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_benchmark(cells, path) -> None:
    """Grouped bars of mean C-index per dataset and variant.

    ``cells`` are (dataset, variant, mean, std) tuples.
    """
    datasets = sorted({c[0] for c in cells})
    variants = sorted({c[1] for c in cells})
    lookup = {(c[0], c[1]): (c[2], c[3]) for c in cells}
    width = 0.8 / max(1, len(variants))
    x = np.arange(len(datasets))
    fig, ax = plt.subplots(figsize=(max(7, 1.6 * len(datasets)), 4.5))
    for i, variant in enumerate(variants):
        means = [lookup.get((d, variant), (np.nan, 0.0))[0] for d in datasets]
        stds = [lookup.get((d, variant), (np.nan, 0.0))[1] for d in datasets]
        ax.bar(x + i * width, means, width, yerr=stds, capsize=3, label=variant)
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels(datasets, rotation=20, ha="right")
    ax.set_ylabel("mean test C-index")
    ax.grid(axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_pvalue_matrix(row_labels, col_labels, matrix, path) -> None:
    """Annotated heatmap of pairwise test p-values."""
    mat = np.asarray(matrix, dtype=float)
    fig, ax = plt.subplots(figsize=(1.4 * len(col_labels) + 2, 1.0 * len(row_labels) + 2))
    im = ax.imshow(mat, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(len(col_labels)))
    ax.set_xticklabels(col_labels, rotation=30, ha="right")
    ax.set_yticks(range(len(row_labels)))
    ax.set_yticklabels(row_labels)
    for i in range(mat.shape[0]):
        for j in range(mat.shape[1]):
            ax.text(j, i, f"{mat[i, j]:.3g}", ha="center", va="center",
                    color="white" if mat[i, j] < 0.5 else "black", fontsize=8)
    fig.colorbar(im, ax=ax, label="p-value")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_fit_grid(report: dict, path) -> None:
    """Validation C-index across the hyperparameter grid of one fit."""
    grid = report.get("grid", [])
    if not grid:
        return
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if "w" in grid[0]:
        by_eps: dict[float, list] = {}
        for entry in grid:
            by_eps.setdefault(entry["epsilon"], []).append((entry["w"], entry["val_cindex"]))
        for eps, points in sorted(by_eps.items()):
            points.sort()
            ax.plot([p[0] for p in points], [p[1] for p in points],
                    marker="o", label=f"eps={eps:g}")
        ax.set_xscale("log")
        ax.set_xlabel("attention temperature w")
    else:
        points = sorted((entry["tau"], entry["val_cindex"]) for entry in grid)
        ax.plot([p[0] for p in points], [p[1] for p in points], marker="o", label="single")
        ax.set_xscale("log")
        ax.set_xlabel("kernel bandwidth tau")
    ax.set_ylabel("validation C-index")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
