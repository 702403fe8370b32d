"""Figure rendering for scenarios, plans, and benchmark summaries.

Everything draws in the x-z projection plane with matplotlib and saves to
whatever format the output suffix names (SVG in the CLI defaults).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Rectangle

from .bench import summarize
from .env import place_beams
from .robot import forward_kinematics
from .scenario import Scenario


def render_plan_figure(scenario: Scenario, states, out_path, max_poses: int = 9) -> Path:
    """Blades, beams, start/goal markers, and sampled body polylines."""
    if not states:
        raise ValueError("cannot render an empty plan")
    env = scenario.environment
    fig, ax = plt.subplots(figsize=(8, 4.5))

    for b in env.blades:
        patch = Rectangle(
            (b.x_interval[0], b.z_interval[0]),
            b.x_interval[1] - b.x_interval[0],
            b.z_interval[1] - b.z_interval[0],
            facecolor="0.35",
            edgecolor="black",
            zorder=2,
        )
        patch.set_gid(f"blade-{b.column_index}-{b.row_index}")
        ax.add_patch(patch)

    for beam in place_beams(env):
        ax.plot(
            [beam.x, beam.x],
            [beam.anchor[1], beam.top_z],
            linestyle="--",
            linewidth=0.8,
            color="tab:orange",
            zorder=1,
        )
        ax.annotate(
            f"b{beam.letter}",
            (beam.x, beam.top_z),
            fontsize=7,
            color="tab:orange",
            ha="center",
            va="bottom",
        )

    if len(states) <= max_poses:
        picks = list(range(len(states)))
    else:
        picks = np.unique(
            np.linspace(0, len(states) - 1, max_poses).astype(int)
        ).tolist()
    cmap = plt.get_cmap("viridis")
    for rank, idx in enumerate(picks):
        pts = forward_kinematics(scenario.robot, states[idx])
        color = cmap(rank / max(1, len(picks) - 1))
        ax.plot(pts[:, 0], pts[:, 2], color=color, linewidth=1.6, zorder=3)

    start_tip = forward_kinematics(scenario.robot, states[0])[-1]
    ax.plot(start_tip[0], start_tip[2], "o", color="tab:blue", label="start tip", zorder=4)
    g = scenario.goal.position
    ax.plot(g[0], g[2], "*", markersize=12, color="tab:red", label="goal", zorder=4)

    ax.set_xlim(env.bounds_min[0], env.bounds_max[0])
    ax.set_ylim(env.bounds_min[2], env.bounds_max[2])
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("z (m)")
    ax.set_title(scenario.name)
    ax.legend(loc="upper left", fontsize=8)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, bbox_inches="tight")
    plt.close(fig)
    return out_path


def render_benchmark_figure(rows, out_path) -> Path:
    """Success-rate bars with mean planning time over successes."""
    summaries = summarize(rows)
    labels = [s.variant.replace("+", "\n") for s in summaries]
    rates = [s.success_rate for s in summaries]
    times = [s.mean_time for s in summaries]

    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(11, 4))
    x = np.arange(len(summaries))
    ax0.bar(x, rates, color="tab:blue")
    ax0.set_xticks(x, labels, fontsize=7)
    ax0.set_ylabel("success rate (%)")
    ax0.set_ylim(0, 100)
    ax1.bar(x, times, color="tab:green")
    ax1.set_xticks(x, labels, fontsize=7)
    ax1.set_ylabel("mean planning time over successes (s)")
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, bbox_inches="tight")
    plt.close(fig)
    return out_path
