"""Static trajectory figures rendered from a run trace."""
from __future__ import annotations

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def plot_trace(records, grid, out_path, title=None):
    """Draw the occupancy map, per-robot trajectories (from published state
    feedback) and goal arrivals, and write the figure to `out_path`."""
    fig, ax = plt.subplots(figsize=(6, 6))

    occupied = sorted(grid.static_cells | grid.fault_cells)
    if occupied:
        xs = [c[0] for c in occupied]
        ys = [c[1] for c in occupied]
        ax.scatter(xs, ys, marker="s", s=120, color="0.25", label="occupied")

    paths = {}
    for r in records:
        if r.get("kind") != "publish" or not r.get("topic", "").endswith("/state"):
            continue
        state = r.get("value", {}).get("state") or {}
        pos = state.get("pos")
        if pos is None:
            continue
        paths.setdefault(r["namespace"], []).append(tuple(pos))

    for namespace in sorted(paths):
        points = paths[namespace]
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        ax.plot(xs, ys, marker=".", markersize=3, linewidth=1, label=namespace)
        if points:
            ax.plot(xs[-1], ys[-1], marker="o", markersize=8,
                    markerfacecolor="none", color=ax.lines[-1].get_color())

    goals = sorted({tuple(r["goal"]) for r in records
                    if r.get("kind") == "arrival"})
    if goals:
        ax.scatter([g[0] for g in goals], [g[1] for g in goals],
                   marker="*", s=160, color="tab:green", zorder=3,
                   label="goals")

    ax.set_xlim(-1, grid.width)
    ax.set_ylim(-1, grid.height)
    ax.invert_yaxis()  # row 0 of the map file is y=0, drawn at the top
    ax.set_aspect("equal")
    ax.set_xlabel("x [cells]")
    ax.set_ylabel("y [cells]")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path
