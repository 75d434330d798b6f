"""
SVG-ready figures: search logs, planned approaches and reward slices. Functions return matplotlib
Figures; the SVG backend serialises them.
"""
import math
from typing import Dict
from typing import Optional
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib import pyplot as plt  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
from matplotlib.patches import Circle  # noqa: E402
from matplotlib.patches import Polygon  # noqa: E402

from humanseek.core import OCCUPIED  # noqa: E402
from humanseek.core import UNKNOWN  # noqa: E402
from humanseek.core import AnnotatedMap  # noqa: E402
from humanseek.core import Pose2D  # noqa: E402
from humanseek.core import Trajectory  # noqa: E402
from humanseek.reward import RewardField  # noqa: E402

__all__ = ["TRUE_DETECTION", "FALSE_DETECTION", "plot_map", "plot_search_log", "plot_plan", "plot_reward_slice"]

TRUE_DETECTION = "tab:blue"
FALSE_DETECTION = "tab:red"


def plot_map(ax, annotated_map: AnnotatedMap, floor: int = 0, labels: bool = True) -> None:
    grid = annotated_map.grid(floor)
    shade = np.zeros(grid.shape)
    shade[grid == OCCUPIED] = 1.0
    shade[grid == UNKNOWN] = 0.4
    xmin, xmax, ymin, ymax = annotated_map.extent
    ax.imshow(shade, cmap="Greys", origin="lower", extent=(xmin, xmax, ymin, ymax), vmin=0.0, vmax=1.0)
    for area in annotated_map.areas:
        if area.floor != floor:
            continue
        ax.add_patch(Polygon(area.polygon, closed=True, fill=False, edgecolor="tab:green", linewidth=0.8))
        if labels:
            cx, cy = np.mean(np.asarray(area.polygon), axis=0)
            ax.text(cx, cy, area.label, fontsize=6, ha="center", va="center", color="tab:green")
    ax.set_xlim(xmin, xmax)
    ax.set_ylim(ymin, ymax)
    ax.set_aspect("equal")


def plot_search_log(
    events: Sequence[Dict], annotated_map: Optional[AnnotatedMap] = None, floor: int = 0, title: str = ""
) -> Figure:
    """
    One line per MoveTo event (gid ``segment-<i>``) from the pose the move was issued at to its
    waypoint; text detections are drawn from the robot to the detected person, blue when correct and red
    otherwise.
    """
    fig, ax = plt.subplots(figsize=(6, 6))
    if annotated_map is not None:
        plot_map(ax, annotated_map, floor)

    segment = 0
    for index, event in enumerate(events):
        pose, payload = event["pose"], event.get("payload", {})
        if event["kind"] == "MoveTo" and "waypoint" in payload:
            target = payload["waypoint"]
            if pose.get("z", 0) != floor and target.get("z", 0) != floor:
                continue
            ax.plot([pose["x"], target["x"]], [pose["y"], target["y"]], color="black", linewidth=1.0, gid=f"segment-{segment}")
            segment += 1
        elif event["kind"] == "Detect":
            px, py = payload["position"]
            colour = TRUE_DETECTION if payload.get("correct") else FALSE_DETECTION
            ax.plot([pose["x"], px], [pose["y"], py], color=colour, linestyle="--", linewidth=0.8, gid=f"detection-{index}")
        elif event["kind"] in ("DeclareSuccess", "DeclareFailure"):
            marker = "*" if event["kind"] == "DeclareSuccess" else "x"
            ax.plot([pose["x"]], [pose["y"]], marker=marker, color="black", markersize=8)

    if events:
        start = events[0]["pose"]
        ax.plot([start["x"]], [start["y"]], marker="o", color="black", markersize=5)
    ax.set_title(title)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    return fig


def plot_plan(
    trajectory: Trajectory,
    human: Pose2D,
    annotated_map: Optional[AnnotatedMap] = None,
    floor: int = 0,
    goal_radius: float = 0.6,
    baseline: Optional[Trajectory] = None,
    title: str = "",
) -> Figure:
    fig, ax = plt.subplots(figsize=(6, 6))
    if annotated_map is not None:
        plot_map(ax, annotated_map, floor, labels=False)

    xy = trajectory.xy
    ax.plot(xy[:, 0], xy[:, 1], color="tab:blue", linewidth=1.5, gid="plan")
    headings = np.array([s.pose.theta for s in trajectory.samples])
    ax.quiver(xy[:, 0], xy[:, 1], np.cos(headings), np.sin(headings), color="tab:blue", scale=25, width=0.004)
    if baseline is not None:
        bxy = baseline.xy
        ax.plot(bxy[:, 0], bxy[:, 1], color="tab:grey", linestyle="--", linewidth=1.0, gid="baseline")

    ax.plot([human.x], [human.y], marker="o", color="tab:red", markersize=7)
    ax.arrow(human.x, human.y, 0.5 * math.cos(human.theta), 0.5 * math.sin(human.theta), color="tab:red", width=0.03)
    ax.add_patch(Circle((human.x, human.y), goal_radius, fill=False, edgecolor="tab:red", linestyle=":"))
    if annotated_map is None:
        pad = 1.0
        xs = np.concatenate([xy[:, 0], [human.x]])
        ys = np.concatenate([xy[:, 1], [human.y]])
        ax.set_xlim(xs.min() - pad, xs.max() + pad)
        ax.set_ylim(ys.min() - pad, ys.max() + pad)
        ax.set_aspect("equal")
    ax.set_title(title)
    return fig


def plot_reward_slice(field: RewardField, g: int = 1, v_index: Optional[int] = None, title: str = "") -> Figure:
    """The (x, y) plane of the field at gaze `g`, maximised over heading (and speed unless given)."""
    plane = field.slice(g, v_index)
    xs, ys = field.grid.x_bins, field.grid.y_bins
    dx, dy = field.grid.spacing[0] / 2.0, field.grid.spacing[1] / 2.0
    fig, ax = plt.subplots(figsize=(7, 4))
    image = ax.imshow(
        plane.T, origin="lower", extent=(xs[0] - dx, xs[-1] + dx, ys[0] - dy, ys[-1] + dy), cmap="viridis", aspect="equal"
    )
    fig.colorbar(image, ax=ax, label="reward")
    ax.plot([0.0], [0.0], marker="o", color="white")
    ax.arrow(0.0, 0.0, 0.6, 0.0, color="white", width=0.04)
    ax.set_xlabel("x (person frame) [m]")
    ax.set_ylabel("y (person frame) [m]")
    ax.set_title(title or f"g = {g}")
    return fig
