"""Figure rendering for the report-producing commands.

Each report command can drop a PNG next to its CSV/JSON output. Rendering
is headless (Agg) and intentionally plain: one figure per file, labeled
axes, no styling dependencies.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_FIGSIZE = (6.0, 4.0)
_DPI = 150


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_latency_dist(records, path):
    """Histogram of per-vertex latency plus latency vs neighborhood size."""
    lat = np.array([r[3] for r in records])
    size = np.array([r[1] for r in records])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    ax1.hist(lat, bins=min(40, max(5, len(lat) // 5)), color="#4878a8", edgecolor="black")
    ax1.set_xlabel("latency (us)")
    ax1.set_ylabel("targets")
    ax1.set_title("inference latency")
    ax2.scatter(size, lat, s=12, alpha=0.6, color="#a84848")
    ax2.set_xlabel("neighborhood size (vertices)")
    ax2.set_ylabel("latency (us)")
    ax2.set_title("latency vs neighborhood")
    return _save(fig, path)


def plot_sweep(header, rows, path):
    """Line plot for one axis, heatmap for two."""
    n_axes = len(header) - 9  # timing columns are fixed
    lat_col = header.index("latency_us")
    if n_axes == 1:
        xs = [float(r[0]) for r in rows]
        ys = [float(r[lat_col]) for r in rows]
        fig, ax = plt.subplots(figsize=_FIGSIZE)
        ax.plot(xs, ys, marker="o", color="#4878a8")
        ax.set_xlabel(header[0])
        ax.set_ylabel("latency (us)")
        ax.set_title(f"latency vs {header[0]}")
        if len(xs) > 2 and xs[0] > 0 and xs[-1] / xs[0] >= 8:
            ax.set_xscale("log", base=2)
        return _save(fig, path)
    xs = sorted({float(r[0]) for r in rows})
    ys = sorted({float(r[1]) for r in rows})
    grid = np.full((len(ys), len(xs)), np.nan)
    for r in rows:
        grid[ys.index(float(r[1])), xs.index(float(r[0]))] = float(r[lat_col])
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(xs)), [f"{v:g}" for v in xs])
    ax.set_yticks(range(len(ys)), [f"{v:g}" for v in ys])
    ax.set_xlabel(header[0])
    ax.set_ylabel(header[1])
    fig.colorbar(im, ax=ax, label="latency (us)")
    ax.set_title("latency heatmap")
    return _save(fig, path)


def plot_compare(header, rows, path):
    """Horizontal bars of speedup versus the emulated baseline."""
    names = [r[0] for r in rows]
    speedups = [float(r[3]) for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 0.5 * len(rows) + 1.5))
    ax.barh(range(len(rows)), speedups, color="#4878a8")
    ax.set_yticks(range(len(rows)), names)
    ax.invert_yaxis()
    ax.set_xlabel("speedup vs baseline-emulation")
    for i, s in enumerate(speedups):
        ax.text(s, i, f" {s:.2f}x", va="center")
    return _save(fig, path)
