"""Figure rendering for plan and Monte Carlo reports (PNG files, Agg backend)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.4,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "svg.hashsalt": "wheretomap",
}


def figure_size(scale=1.0, ratio=None):
    width = 6.0 * scale
    if ratio is None:
        ratio = (math.sqrt(5.0) - 1.0) / 2.0
    return width, width * ratio


def new_figure(scale=1.0, ratio=None, **kwargs):
    with plt.rc_context(STYLE):
        return plt.subplots(figsize=figure_size(scale, ratio), **kwargs)


def save(fig, path):
    with plt.rc_context(STYLE):
        fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_mission(result, scenario, path, field="sigma"):
    """Map overlay: prior or updated map, rover paths, copter route and footprints."""
    from .localizability_map import footprint_half_width

    geom = scenario.belief.geometry
    grid = result.final_map.sigma if field == "sigma" else scenario.belief.mu
    with plt.rc_context(STYLE):
        fig, ax = new_figure(scale=1.0, ratio=1.0)
        im = ax.imshow(grid, origin="lower", extent=geom.extent, cmap="viridis", interpolation="nearest")
        cb = fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        cb.set_label("updated $\\sigma$" if field == "sigma" else "prior $\\mu$")

        x0, y0 = result.initial_path.xy()
        x1, y1 = result.final_path.xy()
        ax.plot(x0, y0, color="tab:blue", lw=1.6, label="initial rover path")
        ax.plot(x1, y1, color="tab:orange", ls="--", lw=1.6, label="final rover path")

        route = [scenario.copter_start] + list(result.plan.poses)
        if scenario.copter_goal is not None:
            route.append(scenario.copter_goal)
        ax.plot([q.x for q in route], [q.y for q in route], color="tab:red", lw=1.0, label="copter route")
        for q in result.plan.poses:
            hw = footprint_half_width(q, scenario.camera)
            ax.add_patch(Rectangle((q.x - hw, q.y - hw), 2 * hw, 2 * hw, fill=False, ec="tab:red", lw=1.0))
            ax.plot(q.x, q.y, "o", color="tab:red", ms=3)
        ax.plot(*scenario.rover_start, "s", color="white", ms=5, mec="k")
        ax.plot(*scenario.rover_goal, "*", color="white", ms=8, mec="k")
        ax.set_xlim(geom.extent[0], geom.extent[1])
        ax.set_ylim(geom.extent[2], geom.extent[3])
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_title(f"reduction {result.reduction_rate:.2f}%  ({len(result.plan)} images)")
        ax.legend(loc="upper left", framealpha=0.8)
    save(fig, path)


def plot_monte_carlo(rows, path):
    with plt.rc_context(STYLE):
        fig, ax = new_figure(scale=1.0)
        idx = np.arange(len(rows))
        ax.bar(idx - 0.2, [r.proposed_rate for r in rows], 0.4, label="proposed", color="tab:orange")
        ax.bar(idx + 0.2, [r.baseline_rate for r in rows], 0.4, label="random baseline", color="tab:gray")
        ax.set_xticks(idx)
        ax.set_xticklabels([f"{r.label}\n({r.start_x:g},{r.start_y:g})" for r in rows])
        ax.set_ylabel("reduction rate [%]")
        ax.legend()
    save(fig, path)
