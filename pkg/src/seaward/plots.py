"""Figure rendering for rollout and monitoring reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .geometry import oriented_rectangle
from .scenarios import Scenario

RHO_COLORS = {0: "tab:green", 1: "tab:blue", 2: "tab:purple", 3: "tab:orange",
              4: "tab:brown", 5: "tab:red", None: "0.6"}
RHO_NAMES = {0: "no conflict", 1: "stand on", 2: "head on", 3: "crossing",
             4: "overtake", 5: "emergency"}


def _rect_patch(ax, length, width, position, orientation, **kw):
    poly = oriented_rectangle(length, width, position, orientation)
    ax.fill(poly.vertices[:, 0], poly.vertices[:, 1], **kw)


def plot_episode(trace_rows, scenario: Scenario, out_path) -> None:
    """Trajectory overview: ego path colored by supervisor state, obstacle
    path, hull snapshots, and the goal region."""
    fig, ax = plt.subplots(figsize=(8, 8))
    ego = np.array([r["ego"][:2] for r in trace_rows])
    obs = np.array([r["obs"][:2] for r in trace_rows])
    rhos = [r["rho"] for r in trace_rows]
    for k in range(len(ego) - 1):
        ax.plot(ego[k:k + 2, 0], ego[k:k + 2, 1], color=RHO_COLORS.get(rhos[k + 1], "0.6"),
                lw=2.0)
    ax.plot(obs[:, 0], obs[:, 1], color="0.4", lw=1.2, ls="--", label="obstacle")
    step = max(1, len(trace_rows) // 8)
    for k in range(0, len(trace_rows), step):
        e = trace_rows[k]["ego"]
        o = trace_rows[k]["obs"]
        _rect_patch(ax, scenario.ego_shape.length, scenario.ego_shape.width,
                    e[:2], e[2], alpha=0.25, color="tab:blue", lw=0)
        _rect_patch(ax, scenario.obstacle_shape.length, scenario.obstacle_shape.width,
                    o[:2], o[2], alpha=0.25, color="tab:orange", lw=0)
    goal = oriented_rectangle(scenario.goal_length, scenario.goal_width,
                              scenario.goal_center, scenario.goal_orientation)
    ax.fill(goal.vertices[:, 0], goal.vertices[:, 1], color="tab:green", alpha=0.4,
            label="goal")
    seen = {r for r in rhos if r is not None}
    handles = [plt.Line2D([], [], color=RHO_COLORS[r], lw=3, label=RHO_NAMES[r])
               for r in sorted(seen)]
    ax.legend(handles=handles + ax.get_legend_handles_labels()[0], loc="best",
              fontsize=8)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    cause = trace_rows[-1].get("terminated")
    ax.set_title(f"{scenario.id} ({scenario.encounter}) - {cause}")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def plot_metrics(metrics: dict, out_path) -> None:
    """Headline batch metrics as a bar panel."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    rates = {"goal reach": metrics.get("goal_reach_rate", 0.0),
             "collision": metrics.get("collision_rate", 0.0),
             "emergency steps": metrics.get("emergency_step_fraction", 0.0)}
    axes[0].bar(list(rates), [100 * v for v in rates.values()],
                color=["tab:green", "tab:red", "tab:orange"])
    axes[0].set_ylabel("% of episodes / steps")
    axes[0].set_ylim(0, 100)
    counts = {"rule violations": metrics.get("rule_violations_total", 0),
              "emergency breaches": metrics.get("emergency_breaches", 0),
              "inconclusive": metrics.get("inconclusive_total", 0)}
    axes[1].bar(list(counts), list(counts.values()), color="tab:gray")
    axes[1].set_ylabel("count")
    for ax in axes:
        ax.tick_params(axis="x", rotation=20)
    fig.suptitle(f"{metrics.get('episodes', 0)} episodes")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def plot_violation_timeline(report: dict, timeline: list, out_path) -> None:
    """Per-step predicate raster for one monitored episode."""
    names = ["keep", "collision_possible", "is_emergency", "resolved"]
    fig, ax = plt.subplots(figsize=(9, 2.5))
    data = np.zeros((len(names), len(timeline)))
    for k, entry in enumerate(timeline):
        for i, nm in enumerate(names):
            data[i, k] = 1.0 if entry[nm] else 0.0
    ax.imshow(data, aspect="auto", cmap="Reds", interpolation="nearest")
    ax.set_yticks(range(len(names)), names, fontsize=8)
    ax.set_xlabel("step")
    ax.set_title(f"{report.get('episode_id', '')}: "
                 f"{report.get('total_violations', 0)} violations")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
