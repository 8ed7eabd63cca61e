"""SVG figure rendering for meshes, deformed grids, square families and
convergence traces.  All figures use the Agg backend and write to files.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Rectangle

from .geometry import PLMap


def _finish(fig, ax, path, title):
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_mesh(plmap: PLMap, path, title: str = "", show_source: bool = False):
    """Deformed mesh as a triplot; optionally the source mesh underneath."""
    fig, ax = plt.subplots(figsize=(5, 5))
    mesh = plmap.mesh
    if show_source:
        ax.triplot(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles,
                   color="0.8", lw=0.5)
    ax.triplot(plmap.target[:, 0], plmap.target[:, 1], mesh.triangles,
               color="tab:blue", lw=0.7)
    _finish(fig, ax, path, title)


def plot_map_grid(mapping, path, lines: int = 21, samples: int = 200,
                  title: str = ""):
    """Image of a coordinate grid under an analytic map."""
    from .verify import _eval_many, _map_domain

    rect, shape = _map_domain(mapping)
    fig, ax = plt.subplots(figsize=(5, 5))
    ts = np.linspace(0.0, 1.0, samples)
    for c in np.linspace(0.0, 1.0, lines):
        x0 = rect.xmin + c * rect.width
        y0 = rect.ymin + c * rect.height
        vertical = (np.full(samples, x0), rect.ymin + ts * rect.height)
        horizontal = (rect.xmin + ts * rect.width, np.full(samples, y0))
        for xs, ys in (vertical, horizontal):
            if shape == "disk":
                keep = xs * xs + ys * ys <= 1.0
                xs, ys = xs[keep], ys[keep]
            if len(xs) < 2:
                continue
            u, v = _eval_many(mapping, xs, ys)
            ax.plot(u, v, color="tab:blue", lw=0.6)
    _finish(fig, ax, path, title)


def plot_square_family(squares, path, centersquares=(), title: str = ""):
    """Filled cornersquare family with outlined centersquares."""
    fig, ax = plt.subplots(figsize=(5, 5))
    for s in squares:
        ax.add_patch(Rectangle((s.xmin, s.ymin), s.side, s.side,
                               facecolor="tab:blue", edgecolor="none"))
    for s in centersquares:
        ax.add_patch(Rectangle((s.xmin, s.ymin), s.side, s.side,
                               facecolor="none", edgecolor="tab:red", lw=0.6))
    ax.autoscale_view()
    _finish(fig, ax, path, title)


def plot_convergence(levels, path, title: str = "", ylabel: str = "energy"):
    """Per-level quadrature or iteration trace on a log-x axis."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(range(len(levels)), levels, marker="o")
    ax.set_xlabel("refinement level")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
