"""Figures written next to the JSON/TSV outputs of the command line tool.

Only the object-oriented matplotlib API is used with an Agg canvas, so no
display or global pyplot state is involved.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .spectral import SpectrumProfile

FIGSIZE = (6.4, 3.6)


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    FigureCanvasAgg(fig)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    return path


def plot_spectrum(profile: SpectrumProfile, path, title: str | None = None) -> Path:
    """Bars of per-hop frequency with the learned hop weights on a twin axis."""
    fig = Figure(figsize=FIGSIZE)
    ax = fig.add_subplot(1, 1, 1)
    hops = np.arange(profile.n_hops)
    ax.bar(hops, profile.frequencies, color="0.7", label="frequency")
    ax.set_xlabel("hop k")
    ax.set_ylabel("signal frequency")
    ax.set_ylim(0, 1)
    ax2 = ax.twinx()
    ax2.plot(hops, profile.weights, "o-", color="C3", label="weight")
    ax2.axhline(0, color="C3", lw=0.5, ls=":")
    ax2.set_ylabel("hop weight", color="C3")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_angles(degrees, path, title: str | None = None) -> Path:
    """Consecutive-hop angle in degrees against hop index (log-scaled if it spans decades)."""
    degrees = np.asarray(degrees, dtype=float)
    fig = Figure(figsize=FIGSIZE)
    ax = fig.add_subplot(1, 1, 1)
    hops = np.arange(1, degrees.size + 1)
    ax.plot(hops, degrees, lw=1)
    pos = degrees[degrees > 0]
    if pos.size and pos.max() / pos.min() > 1e3:
        ax.set_yscale("log")
    ax.set_xlabel("hop k")
    ax.set_ylabel("angle(k-1, k) [deg]")
    if title:
        ax.set_title(title)
    return _save(fig, path)
