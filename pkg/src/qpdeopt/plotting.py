"""PNG figures for CLI outputs. matplotlib is imported only when plotting."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_landscape(table, path: Path) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(table.index, table.f_oracle, "k-", lw=1, label="expm oracle")
    ax.plot(table.index, table.f_encoded, "o", ms=4, mfc="none", label="block-encoding")
    ax.set_xlabel("design index")
    ax.set_ylabel("objective")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_history(hist, table, path: Path) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    e, s = hist.expectation, hist.stddev
    ax.plot(hist.step, e, "r-", lw=1.2)
    ax.fill_between(hist.step, e - s, e + s, color="purple", alpha=0.25, lw=0)
    best = table.f_encoded[table.argextremum_index]
    ax.axhline(best, color="k", ls="--", lw=1)
    ax.set_xlabel("step")
    ax.set_ylabel("expected objective")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_distribution(dist, path: Path) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(np.arange(dist.probabilities.size), dist.probabilities, color="tab:blue")
    ax.set_xlabel("design index")
    ax.set_ylabel("probability")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_forward(csv_path: Path, path: Path) -> None:
    with open(csv_path) as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    col = {h: i for i, h in enumerate(header)}
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if "price" in col:
        ax.plot(data[:, col["x"]], data[:, col["price"]], "b-")
        ax.set_xlabel("log price x")
        ax.set_ylabel("option price")
    elif "component" in col:
        first = data[:, col["component"]] == 0
        for h in header:
            if h.startswith("energy_t"):
                ax.plot(data[first, col["x"]], data[first, col[h]], label=h[len("energy_t"):])
        ax.set_xlabel("x")
        ax.set_ylabel("local energy")
        ax.legend(title="t", frameon=False, fontsize=8)
    else:
        ax.plot(data[:, col["node_index"]], data[:, col["re_u"]], "b-")
        ax.set_xlabel("node")
        ax.set_ylabel("Re u")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
