"""Report figures, rendered off-screen next to the CSV/JSON outputs.

Figures are built on a bare Agg canvas (no pyplot state) and saved without
the software tag, so identical data give byte-identical PNG files.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
}

_GOLDEN = (math.sqrt(5) - 1) / 2


def new_figure(width: float = 5.0, aspect: float = _GOLDEN, ncols: int = 1):
    import matplotlib

    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(width, width * aspect), dpi=100)
        FigureCanvasAgg(fig)
        axes = [fig.add_subplot(1, ncols, i + 1) for i in range(ncols)]
    return fig, axes


def save(fig: Figure, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    return path


def _extent(grid):
    lo, hi = -0.5 * grid.L, 0.5 * grid.L - grid.h
    return (lo, hi, lo, hi)


def plot_certificate(u, mask: np.ndarray, threshold: float, path) -> Path:
    """|u| with the witness set; a line plot in 1D, an image pair in 2D, a mid-slice in 3D."""
    g = u.grid
    mag = u.magnitude()
    if g.d == 1:
        fig, (ax,) = new_figure()
        x = g.coords()
        ax.plot(x, mag, color="k", label="|u|")
        ax.fill_between(x, 0, mag.max(), where=mask, color="C1", alpha=0.3, step="mid", label="S")
        ax.axhline(threshold, color="C0", ls="--", label="threshold")
        ax.set_xlabel("x")
        ax.legend(loc="upper right")
        return save(fig, path)
    if g.d == 3:
        mid = g.n // 2
        mag, mask = mag[:, :, mid], mask[:, :, mid]
    fig, (a0, a1) = new_figure(width=6.0, aspect=0.45, ncols=2)
    im = a0.imshow(mag.T, origin="lower", extent=_extent(g), cmap="viridis")
    fig.colorbar(im, ax=a0, shrink=0.8)
    a0.set_title("|u|")
    a1.imshow(mask.T, origin="lower", extent=_extent(g), cmap="Greys", vmin=0, vmax=1)
    a1.set_title("witness set")
    return save(fig, path)


def plot_blocks(levels, norms, path, label: str = "||Delta_j u||") -> Path:
    fig, (ax,) = new_figure()
    norms = np.asarray(norms, dtype=float)
    ax.semilogy(levels, np.where(norms > 0, norms, np.nan), "o-", color="k")
    ax.set_xlabel("j")
    ax.set_ylabel(label)
    return save(fig, path)


def plot_terms(names, values, bound: float, path) -> Path:
    """Bar chart of estimate terms against a common bound."""
    fig, (ax,) = new_figure()
    ax.bar(range(len(values)), values, color="C0")
    ax.axhline(bound, color="C3", ls="--", label="bound")
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels(names)
    ax.legend()
    return save(fig, path)


def plot_series(t, series: dict, path, logy: bool = True) -> Path:
    fig, (ax,) = new_figure()
    for i, (name, y) in enumerate(sorted(series.items())):
        y = np.asarray(y, dtype=float)
        if logy and np.all(y > 0):
            ax.semilogy(t, y, color=f"C{i}", label=name)
        else:
            ax.plot(t, y, color=f"C{i}", label=name)
    ax.set_xlabel("t")
    ax.legend()
    return save(fig, path)


def plot_region(region, path, window=None) -> Path:
    """Admissible polygon in the (zeta_x, zeta_t) plane with its constraint lines."""
    fig, (ax,) = new_figure(width=4.5, aspect=0.9)
    pts = np.array([[float(x), float(t)] for x, t in region.points]) if region.vertices else None
    if window is None:
        if pts is not None and len(pts):
            top = max(1.0, float(pts.max()) * 1.25)
        else:
            top = 2.0
        window = (0.0, top, 0.0, top)
    x0, x1, t0, t1 = (float(w) for w in window)
    xs = np.linspace(x0, x1, 2)
    for i, h in enumerate(region.constraints):
        if h.b != 0:
            ts = (float(h.c) - float(h.a) * xs) / float(h.b)
            ax.plot(xs, ts, color=f"C{i % 10}", ls=":" if h.strict else "-", lw=0.8, label=h.label)
        else:
            ax.axvline(float(h.c) / float(h.a), color=f"C{i % 10}", lw=0.8, label=h.label)
    if pts is not None and len(pts) >= 3 and region.bounded:
        ax.fill(pts[:, 0], pts[:, 1], color="purple", alpha=0.35)
    if pts is not None and len(pts):
        ax.plot(pts[:, 0], pts[:, 1], "o", color="purple", ms=3)
    ax.set_xlim(x0, x1)
    ax.set_ylim(t0, t1)
    ax.set_xlabel("zeta_x")
    ax.set_ylabel("zeta_t")
    ax.legend(loc="upper left", fontsize=6)
    return save(fig, path)
