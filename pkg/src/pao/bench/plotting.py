"""SVG figures for the bench outputs.

Figures are written with a fixed hash salt and no timestamp so that the
same data always yields the same bytes.  Each file carries an XML comment
naming the CSV it was drawn from.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({
    "svg.hashsalt": "pao",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "lines.markersize": 4,
    "figure.figsize": (5.0, 3.4),
})


def _save(fig, path: Path, source: str | None) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    if source:
        text = path.read_text()
        head, sep, body = text.partition("?>")
        comment = f"\n<!-- data: {source} -->"
        path.write_text(head + sep + comment + body if sep else comment.lstrip() + "\n" + text)
    return path


def line_plot(path, series: dict[str, tuple], xlabel: str, ylabel: str, source: str | None = None,
              logx: bool = False, step: bool = False) -> Path:
    """One line per entry of ``series``: name -> (x, y)."""
    fig, ax = plt.subplots()
    for name, (x, y) in series.items():
        if step:
            ax.step(x, y, where="post", label=name)
        else:
            ax.plot(x, y, marker="o", label=name)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend(frameon=False)
    return _save(fig, path, source)


def scatter_plot(path, x, y, xlabel: str, ylabel: str, source: str | None = None,
                 binned: tuple | None = None) -> Path:
    fig, ax = plt.subplots()
    ax.scatter(x, y, s=6, alpha=0.5)
    if binned is not None:
        ax.plot(binned[0], binned[1], color="k", marker="s", label="bin mean")
        ax.legend(frameon=False)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return _save(fig, path, source)


def heatmap_plot(path, grids: dict[str, np.ndarray], az_deg, el_deg, source: str | None = None) -> Path:
    """Stacked color maps (rows = elevation, columns = azimuth) sharing one scale."""
    vals = np.concatenate([g.ravel() for g in grids.values()])
    lo, hi = float(np.min(vals)), float(np.max(vals))
    fig, axes = plt.subplots(len(grids), 1, figsize=(6.0, 1.6 * len(grids) + 0.6), squeeze=False)
    for ax, (name, g) in zip(axes[:, 0], grids.items()):
        im = ax.imshow(g, aspect="auto", vmin=lo, vmax=hi, cmap="viridis",
                       extent=(az_deg[0] - 2.7, az_deg[-1] + 2.7, len(el_deg) - 0.5, -0.5))
        ax.set_yticks(range(len(el_deg)), [f"{e:g}" for e in el_deg])
        ax.set_title(name, fontsize=9)
        ax.set_ylabel("el (deg)")
        ax.grid(False)
        fig.colorbar(im, ax=ax, label="dBm")
    axes[-1, 0].set_xlabel("az (deg)")
    return _save(fig, path, source)
