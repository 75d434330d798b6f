"""
Approach planning: blend the demonstration and language rewards, then search a collision-free SE(2)
path into the goal disk around the person with a fast-marching-tree planner whose edge cost is
zeta * (1 - R_T(arrival)) * (w_p * |dq| + w_o * |dtheta|). Speeds are assigned afterwards from the
reward's best velocity bin.
"""
import heapq
import math
from dataclasses import asdict
from dataclasses import dataclass
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from humanseek.core import FREE
from humanseek.core import AnnotatedMap
from humanseek.core import Pose2D
from humanseek.core import Trajectory
from humanseek.core import TrajectorySample
from humanseek.core import discretize_array
from humanseek.core import wrap_angle
from humanseek.exceptions import PlanningError
from humanseek.reward import RewardField

__all__ = [
    "PlannerParams",
    "PlanRequest",
    "blend",
    "edge_cost",
    "path_cost",
    "segment_free",
    "connection_radius",
    "plan_path",
    "plan",
    "straight_path",
    "assign_velocities",
]

Config = Tuple[float, float, float]


@dataclass(frozen=True)
class PlannerParams:
    w_r: float = 0.2
    w_p: float = 1.0
    w_o: float = 0.5
    zeta: float = 1.5
    samples: int = 2000
    connection_radius: Optional[float] = None
    goal_radius: float = 0.6
    radius_tuning: float = 1.1
    radius_floor: float = 0.5
    window_padding: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.w_r <= 1.0:
            raise ValueError("w_r must lie in [0, 1]")
        if min(self.w_p, self.w_o, self.zeta) < 0:
            raise ValueError("planner weights must be non-negative")
        if self.samples < 10:
            raise ValueError("at least 10 samples are required")
        if not self.goal_radius > 0:
            raise ValueError("goal_radius must be positive")

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class PlanRequest:
    start: Pose2D
    human: Pose2D
    gaze: int
    map: AnnotatedMap
    reward: RewardField
    floor: int = 0


def blend(R_I: RewardField, R_L: RewardField, w_r: float = 0.2) -> RewardField:
    """w_r * R_I + (1 - w_r) * R_L rescaled to [0, 1]; a constant blend becomes all zeros."""
    R_I.check_compatible(R_L)
    values = w_r * R_I.values + (1.0 - w_r) * R_L.values
    low, high = values.min(), values.max()
    if high - low <= 0:
        values = np.zeros_like(values)
    else:
        values = (values - low) / (high - low)
    return RewardField(values=values, grid=R_I.grid, meta=dict(source="blend", w_r=w_r))


def _relative(xy: np.ndarray, theta: np.ndarray, human: Pose2D) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    dx, dy = xy[:, 0] - human.x, xy[:, 1] - human.y
    c, s = math.cos(human.theta), math.sin(human.theta)
    return c * dx + s * dy, -s * dx + c * dy, wrap_angle(theta - human.theta)


def _reward_lookup(
    R_T: RewardField, g: int, xy: np.ndarray, theta: np.ndarray, human: Pose2D, v_b: Optional[float] = None
) -> np.ndarray:
    """R_T at the human-frame states of world configurations; v_b None takes the best speed bin."""
    rx, ry, rt = _relative(np.atleast_2d(xy), np.atleast_1d(theta), human)
    v = np.zeros_like(rx) if v_b is None else np.full_like(rx, v_b)
    states = np.column_stack([rx, ry, rt, np.full_like(rx, g), v])
    index = discretize_array(states, R_T.grid)
    if v_b is None:
        return R_T.values[index[:, 0], index[:, 1], index[:, 2], index[:, 3], :].max(axis=-1)
    return R_T.values[tuple(index.T)]


def edge_cost(
    a: Sequence[float],
    b: Sequence[float],
    R_T: Union[RewardField, float],
    g: int = 1,
    v_b: Optional[float] = None,
    params: PlannerParams = PlannerParams(),
    human: Pose2D = Pose2D(0.0, 0.0, 0.0),
) -> float:
    """
    Cost of moving from configuration a = (x, y, theta) to b. R_T is a field evaluated at b in the
    human frame (best speed bin when v_b is None) or the reward value at b itself.
    """
    dist = params.w_p * math.hypot(b[0] - a[0], b[1] - a[1]) + params.w_o * abs(wrap_angle(b[2] - a[2]))
    if isinstance(R_T, RewardField):
        reward = float(_reward_lookup(R_T, g, np.array([[b[0], b[1]]]), np.array([b[2]]), human, v_b)[0])
    else:
        reward = float(R_T)
    return params.zeta * (1.0 - reward) * dist


def path_cost(
    path: Sequence[Config], R_T: RewardField, g: int, human: Pose2D, params: PlannerParams = PlannerParams()
) -> float:
    return float(sum(edge_cost(a, b, R_T, g, None, params, human) for a, b in zip(path[:-1], path[1:])))


def segment_free(annotated_map: AnnotatedMap, a: Sequence[float], b: Sequence[float], floor: int = 0) -> bool:
    """Every point sampled at half-cell spacing along a-b lies in a free, in-bounds cell."""
    length = math.hypot(b[0] - a[0], b[1] - a[1])
    n = max(2, int(math.ceil(length / (annotated_map.resolution / 2.0))) + 1)
    fractions = np.linspace(0.0, 1.0, n)
    xs = a[0] + fractions * (b[0] - a[0])
    ys = a[1] + fractions * (b[1] - a[1])
    return bool(_points_free(annotated_map, xs, ys, floor).all())


def _points_free(annotated_map: AnnotatedMap, xs: np.ndarray, ys: np.ndarray, floor: int) -> np.ndarray:
    grid = annotated_map.grid(floor)
    ox, oy = annotated_map.origin
    rows = np.floor((np.asarray(ys) - oy) / annotated_map.resolution).astype(int)
    cols = np.floor((np.asarray(xs) - ox) / annotated_map.resolution).astype(int)
    inside = (rows >= 0) & (rows < grid.shape[0]) & (cols >= 0) & (cols < grid.shape[1])
    free = np.zeros(rows.shape, dtype=bool)
    free[inside] = grid[rows[inside], cols[inside]] == FREE
    return free


def connection_radius(n: int, free_volume: float, params: PlannerParams = PlannerParams(), dim: int = 3) -> float:
    """FMT* radius gamma * (log n / n)^(1/d) with gamma = tuning * 2 (1 + 1/d)^(1/d) (mu / zeta_d)^(1/d)."""
    if params.connection_radius is not None:
        return params.connection_radius
    unit_ball = math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)
    gamma = params.radius_tuning * 2.0 * (1.0 + 1.0 / dim) ** (1.0 / dim) * (free_volume / unit_ball) ** (1.0 / dim)
    return max(params.radius_floor, gamma * (math.log(n) / n) ** (1.0 / dim))


def straight_path(start: Pose2D, human: Pose2D, distance: float, heading: Optional[float] = None) -> List[Config]:
    """Start and the point `distance` short of the person on the line between them."""
    dx, dy = start.x - human.x, start.y - human.y
    norm = math.hypot(dx, dy)
    if norm <= distance:
        return [(start.x, start.y, start.theta)]
    theta = start.theta if heading is None else heading
    gx, gy = human.x + distance * dx / norm, human.y + distance * dy / norm
    return [(start.x, start.y, theta), (gx, gy, theta)]


def _sample_configs(request: PlanRequest, params: PlannerParams, rng: np.random.Generator):
    xmin, xmax, ymin, ymax = request.map.extent
    pad = params.window_padding
    lo_x = max(xmin, min(request.start.x, request.human.x) - pad)
    hi_x = min(xmax, max(request.start.x, request.human.x) + pad)
    lo_y = max(ymin, min(request.start.y, request.human.y) - pad)
    hi_y = min(ymax, max(request.start.y, request.human.y) + pad)

    accepted_xy, accepted_theta = [], []
    needed, attempts = params.samples, 0
    while needed > 0 and attempts < 20:
        batch = max(needed * 2, 64)
        xs = rng.uniform(lo_x, hi_x, batch)
        ys = rng.uniform(lo_y, hi_y, batch)
        thetas = rng.uniform(-math.pi, math.pi, batch)
        ok = _points_free(request.map, xs, ys, request.floor)
        take = np.nonzero(ok)[0][:needed]
        accepted_xy.append(np.column_stack([xs[take], ys[take]]))
        accepted_theta.append(thetas[take])
        needed -= len(take)
        attempts += 1

    n_goal = max(20, params.samples // 20)
    radius = params.goal_radius * 0.999 * np.sqrt(rng.uniform(0.0, 1.0, n_goal * 4))
    angle = rng.uniform(-math.pi, math.pi, n_goal * 4)
    gx = request.human.x + radius * np.cos(angle)
    gy = request.human.y + radius * np.sin(angle)
    gt = rng.uniform(-math.pi, math.pi, n_goal * 4)
    ok = np.nonzero(_points_free(request.map, gx, gy, request.floor))[0][:n_goal]
    accepted_xy.append(np.column_stack([gx[ok], gy[ok]]))
    accepted_theta.append(gt[ok])

    xy = np.concatenate(accepted_xy, axis=0)
    theta = np.concatenate(accepted_theta)
    volume = (hi_x - lo_x) * (hi_y - lo_y) * 2.0 * math.pi
    return xy, theta, volume


def plan_path(request: PlanRequest, params: PlannerParams = PlannerParams(), rng: Optional[np.random.Generator] = None):
    """
    Collision-free configuration sequence from the start into the goal disk, and its cost.
    Raises PlanningError when the sample budget yields no path.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    start, human = request.start, request.human
    if not _points_free(request.map, np.array([start.x]), np.array([start.y]), request.floor)[0]:
        raise PlanningError(f"The start configuration ({start.x:.2f}, {start.y:.2f}) is in collision")
    field = request.reward

    samples_xy, samples_theta, volume = _sample_configs(request, params, rng)
    xy = np.vstack([[start.x, start.y], samples_xy])
    theta = np.concatenate([[start.theta], samples_theta])
    n = len(xy)
    reward = _reward_lookup(field, request.gaze, xy, theta, human)
    in_goal = np.hypot(xy[:, 0] - human.x, xy[:, 1] - human.y) <= params.goal_radius
    radius = connection_radius(n, volume, params)
    neighbours = [np.asarray(sorted(nb), dtype=int) for nb in cKDTree(xy).query_ball_point(xy, r=radius)]
    logger.debug(f"Planning over {n} configurations, connection radius {radius:.2f} m")

    def costs_into(target: int, sources: np.ndarray) -> np.ndarray:
        dq = np.hypot(xy[sources, 0] - xy[target, 0], xy[sources, 1] - xy[target, 1])
        dt = np.abs(wrap_angle(theta[target] - theta[sources]))
        return params.zeta * (1.0 - reward[target]) * (params.w_p * dq + params.w_o * np.atleast_1d(dt))

    cost = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=int)
    unvisited = np.ones(n, dtype=bool)
    open_mask = np.zeros(n, dtype=bool)
    cost[0], unvisited[0], open_mask[0] = 0.0, False, True
    heap = [(0.0, 0)]
    goal = None

    while heap:
        z_cost, z = heapq.heappop(heap)
        if not open_mask[z] or z_cost > cost[z]:
            continue
        if in_goal[z]:
            goal = z
            break
        added = []
        for x in neighbours[z][unvisited[neighbours[z]]]:
            near = neighbours[x][open_mask[neighbours[x]]]
            if near.size == 0:
                continue
            candidates = cost[near] + costs_into(x, near)
            best = int(np.argmin(candidates))
            y = int(near[best])
            if segment_free(request.map, (xy[y, 0], xy[y, 1]), (xy[x, 0], xy[x, 1]), request.floor):
                cost[x], parent[x] = float(candidates[best]), y
                added.append(int(x))
        for x in added:
            unvisited[x], open_mask[x] = False, True
            heapq.heappush(heap, (cost[x], x))
        open_mask[z] = False

    path: Optional[List[Config]] = None
    if goal is not None:
        nodes = [goal]
        while nodes[-1] != 0:
            nodes.append(int(parent[nodes[-1]]))
        nodes.reverse()
        nodes = _shortcut(nodes, xy, theta, request, field, params)
        path = [(float(xy[i, 0]), float(xy[i, 1]), float(theta[i])) for i in nodes]

    straight = straight_path(start, human, params.goal_radius * 0.999)
    straight_ok = all(segment_free(request.map, a, b, request.floor) for a, b in zip(straight[:-1], straight[1:]))
    if straight_ok:
        straight_cost = path_cost(straight, field, request.gaze, human, params)
        if path is None or straight_cost <= path_cost(path, field, request.gaze, human, params):
            path = straight

    if path is None:
        raise PlanningError(f"No path found with {params.samples} samples; increase the sample budget")
    return path, path_cost(path, field, request.gaze, human, params)


def _shortcut(nodes: List[int], xy, theta, request: PlanRequest, field: RewardField, params: PlannerParams) -> List[int]:
    """Replace sub-paths by direct edges when the edge is free and no more expensive."""

    def cfg(i):
        return xy[i, 0], xy[i, 1], theta[i]

    out, i = [nodes[0]], 0
    while i < len(nodes) - 1:
        nxt = i + 1
        for j in range(len(nodes) - 1, i + 1, -1):
            direct = edge_cost(cfg(nodes[i]), cfg(nodes[j]), field, request.gaze, None, params, request.human)
            via = sum(
                edge_cost(cfg(nodes[k]), cfg(nodes[k + 1]), field, request.gaze, None, params, request.human)
                for k in range(i, j)
            )
            if direct <= via and segment_free(request.map, cfg(nodes[i]), cfg(nodes[j]), request.floor):
                nxt = j
                break
        out.append(nodes[nxt])
        i = nxt
    return out


def assign_velocities(
    path: Sequence[Config], R_T: RewardField, g: int, human: Pose2D = Pose2D(0.0, 0.0, 0.0)
) -> Trajectory:
    """
    Speed of each waypoint is the reward-maximising speed bin at its human-frame state (ties go to the
    slowest); a segment takes its length divided by the speed of the waypoint it leaves.
    """
    if not path:
        raise ValueError("An empty path has no velocities")
    xy = np.array([[p[0], p[1]] for p in path], dtype=float)
    theta = np.array([p[2] for p in path], dtype=float)
    rx, ry, rt = _relative(xy, theta, human)
    states = np.column_stack([rx, ry, rt, np.full_like(rx, g), np.zeros_like(rx)])
    index = discretize_array(states, R_T.grid)
    per_speed = R_T.values[index[:, 0], index[:, 1], index[:, 2], index[:, 3], :]
    speeds = np.asarray(R_T.grid.v_bins, dtype=float)[np.argmax(per_speed, axis=1)]

    samples, t = [], 0.0
    for i, (x, y, th) in enumerate(path):
        if i > 0:
            length = math.hypot(x - path[i - 1][0], y - path[i - 1][1])
            t += max(length / speeds[i - 1], 1e-3)
        samples.append(TrajectorySample(t=t, pose=Pose2D(x, y, th), v=float(speeds[i])))
    return Trajectory(samples=tuple(samples), frame="world")


def plan(request: PlanRequest, params: PlannerParams = PlannerParams(), rng: Optional[np.random.Generator] = None) -> Trajectory:
    path, cost = plan_path(request, params, rng)
    logger.info(f"Planned {len(path)} waypoints with cost {cost:.3f}")
    return assign_velocities(path, request.reward, request.gaze, request.human)
