"""Matplotlib figures rendered next to the CSV output."""

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .harness import indices, reliability_asymptote

_ETA_STYLES = [
    ("eta1", "o", "two-level + res"),
    ("eta2", "s", "two-level + osc"),
    ("eta3", "^", "two-level + apx"),
    ("eta4", "v", "interp + res"),
    ("eta5", "D", "interp + osc"),
    ("eta6", "x", "interp + apx"),
]


def _series(records, name):
    pts = [(r.nrelements, getattr(r, name)) for r in records if getattr(r, name)]
    if not pts:
        return None, None
    arr = np.asarray(pts, dtype=float)
    return arr[:, 0], arr[:, 1]


def convergence_figure(records, title=""):
    """log-log plot of all estimator totals (and the error if known)."""
    fig = Figure(figsize=(6.4, 4.8))
    ax = fig.add_subplot(111)
    for name, marker, label in _ETA_STYLES:
        n, q = _series(records, name)
        if n is not None:
            ax.loglog(n, q, marker=marker, ms=4, lw=0.8, label=label)
    n, q = _series(records, "errorH1semiosc")
    if n is not None:
        ax.loglog(n, q, "k-", marker="*", ms=6, lw=1.2, label="error (+osc)")
    n, q = _series(records, "mutilde")
    if n is not None:
        ax.loglog(n, q, ":", color="gray", lw=1.0, label="two-grid difference")
    ax.set_xlabel("number of elements")
    ax.set_ylabel("estimators and error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7, ncol=2)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def indices_figure(records, p=None, mode=None, title=""):
    """Efficiency and reliability indices per level, with the known limit."""
    fig = Figure(figsize=(6.4, 4.8))
    ax = fig.add_subplot(111)
    rows = [(r.nrelements, indices(r)) for r in records if r.errorH1semiosc]
    if rows:
        n = np.array([row[0] for row in rows], dtype=float)
        ax.semilogx(n, [row[1].efficiency for row in rows], "o-", ms=4, label="efficiency")
        ax.semilogx(n, [row[1].reliability for row in rows], "s-", ms=4, label="reliability")
    if p is not None and mode is not None:
        bound = reliability_asymptote(p, mode)
        ax.axhline(bound, ls="--", color="k", lw=0.8, label=f"asymptote {bound:.4f}")
    ax.axhline(1.0, ls=":", color="gray", lw=0.8)
    ax.set_xlabel("number of elements")
    ax.set_ylabel("index")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def render_figures(records, out_csv, p=None, mode=None, title=""):
    """Write the convergence (and, when possible, indices) PNGs.

    Files land alongside ``out_csv`` with suffixes ``-convergence.png`` and
    ``-indices.png``; the list of written paths is returned.
    """
    stem = Path(out_csv).with_suffix("")
    written = []
    fig = convergence_figure(records, title=title)
    path = Path(f"{stem}-convergence.png")
    FigureCanvasAgg(fig).print_png(str(path))
    written.append(path)
    if any(r.errorH1semiosc for r in records):
        fig = indices_figure(records, p=p, mode=mode, title=title)
        path = Path(f"{stem}-indices.png")
        FigureCanvasAgg(fig).print_png(str(path))
        written.append(path)
    return written
