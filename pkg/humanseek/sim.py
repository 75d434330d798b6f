"""
Deterministic 2D world and episode runners.

A search episode wires the label prior, the search state machine and the simulated detectors
together: the robot follows grid shortest paths between the emitted waypoints, the feedback oracle
answers by person identity, and every event is logged. An approach episode plans (or drives straight)
from the robot's pose into the goal disk around the target person.
"""
import json
import math
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from enum import Enum
from pathlib import Path
from typing import Dict
from typing import List
from typing import Mapping
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd
from joblib import Parallel
from joblib import delayed
from loguru import logger

from humanseek.core import FLOOR_CHANGE_COST
from humanseek.core import FREE
from humanseek.core import AnnotatedMap
from humanseek.core import ApproachState
from humanseek.core import Pose2D
from humanseek.core import Trajectory
from humanseek.core import TrajectorySample
from humanseek.core import Waypoint
from humanseek.core import load_map
from humanseek.core import wrap_angle
from humanseek.exceptions import EpisodeError
from humanseek.exceptions import MapFormatError
from humanseek.exceptions import MetricsError
from humanseek.gridmap import GridGraph
from humanseek.gridmap import nearest_free_cell
from humanseek.gridmap import path_length
from humanseek.kdmrl import Demonstration
from humanseek.perception import DetectionKind
from humanseek.perception import Person
from humanseek.perception import SensorModel
from humanseek.perception import gaze_flag
from humanseek.perception import observe
from humanseek.perception import visible_cells
from humanseek.planner import PlannerParams
from humanseek.planner import PlanRequest
from humanseek.planner import blend
from humanseek.planner import plan
from humanseek.planner import segment_free
from humanseek.planner import straight_path
from humanseek.prior import EmbeddingTable
from humanseek.prior import ReplaySentenceSource
from humanseek.prior import SentenceSource
from humanseek.prior import TemplateSentenceSource
from humanseek.prior import compute_label_priors
from humanseek.prior import generate_sentences
from humanseek.reward import RewardField
from humanseek.search import EventKind
from humanseek.search import Method
from humanseek.search import Observation
from humanseek.search import SearchAgent
from humanseek.search import SearchConfig

__all__ = [
    "SEARCH_SPEED",
    "BASELINE_SPEED",
    "ApproachMethod",
    "World",
    "EpisodeResult",
    "Metrics",
    "world_from_dict",
    "load_world",
    "load_suite",
    "world_priors",
    "shortest_path_length",
    "run_search_episode",
    "run_search_suite",
    "run_approach_episode",
    "compute_metrics",
    "results_frame",
    "results_from_frame",
    "frontal_cone_ratio",
    "heading_total_variation",
    "synthetic_demonstrations",
    "constant_speed_trajectory",
]

SEARCH_SPEED = 0.65
BASELINE_SPEED = 0.4
MAX_STEPS = 500


class ApproachMethod(str, Enum):
    Hybrid = "hybrid"
    LfD = "lfd"
    KD = "kd"
    Baseline = "baseline"

    @classmethod
    def parse(cls, name: str) -> "ApproachMethod":
        for method in cls:
            if method.value == str(name).lower():
                return method
        raise ValueError(f"Unknown approach method '{name}' (expected one of {[m.value for m in cls]})")


@dataclass(frozen=True, eq=False)
class World:
    map: AnnotatedMap
    persons: Tuple[Person, ...]
    robot: Waypoint
    target_id: int
    name: str = "world"
    starts: Tuple[Waypoint, ...] = ()
    sentence_files: Dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "persons", tuple(self.persons))
        object.__setattr__(self, "starts", tuple(self.starts) or (self.robot,))
        if self.target_id not in [p.id for p in self.persons]:
            raise EpisodeError(f"Target {self.target_id} is not among the persons of world '{self.name}'")
        if not 0 <= self.robot.z < self.map.floors:
            raise EpisodeError(f"The robot starts on missing floor {self.robot.z}")

    @property
    def target(self) -> Person:
        return next(p for p in self.persons if p.id == self.target_id)

    def episode(self, target_id: int, robot: Waypoint) -> "World":
        return replace(self, target_id=target_id, robot=robot)


def _waypoint(data: Dict) -> Waypoint:
    return Waypoint(float(data["x"]), float(data["y"]), int(data.get("z", data.get("floor", 0))), float(data.get("theta", 0.0)))


def world_from_dict(data: Dict, base_dir: Union[str, Path, None] = None) -> World:
    """
    World files reference their map by a path relative to the world file; persons carry id, pose,
    appearance, location clue and floor; ``sentences`` optionally maps person ids to replay files.
    """
    base = Path(base_dir) if base_dir is not None else Path(".")
    try:
        annotated_map = load_map(base / data["map"])
        persons = tuple(
            Person(
                id=int(p["id"]),
                pose=Pose2D.from_dict(p["pose"]),
                appearance=str(p["appearance"]),
                location_clue=str(p.get("location_clue", "")),
                floor=int(p.get("floor", 0)),
            )
            for p in data["persons"]
        )
        robot = _waypoint(data["robot"])
        starts = tuple(_waypoint(s) for s in data.get("starts", ()))
        sentence_files = {int(k): str(base / v) for k, v in data.get("sentences", {}).items()}
        return World(
            map=annotated_map,
            persons=persons,
            robot=robot,
            target_id=int(data.get("target_id", persons[0].id)),
            name=str(data.get("name", "world")),
            starts=starts,
            sentence_files=sentence_files,
        )
    except (KeyError, TypeError, ValueError, IndexError) as ex:
        raise MapFormatError(f"Malformed world description: {ex}")


def load_world(path: Union[str, Path]) -> World:
    path = Path(path)
    with open(path, "r") as fil:
        try:
            data = json.load(fil)
        except json.JSONDecodeError as ex:
            raise MapFormatError(f"{path}: {ex}")
    return world_from_dict(data, base_dir=path.parent)


def load_suite(path: Union[str, Path]) -> List[World]:
    """Every (world, target person, start) combination of the worlds the suite file lists, in file order."""
    path = Path(path)
    with open(path, "r") as fil:
        try:
            entries = json.load(fil)["worlds"]
        except (json.JSONDecodeError, KeyError, TypeError) as ex:
            raise MapFormatError(f"{path} is not a suite file: {ex}")
    episodes = []
    for entry in entries:
        world = load_world(path.parent / entry)
        for person in sorted(world.persons, key=lambda p: p.id):
            for start in world.starts:
                episodes.append(world.episode(person.id, start))
    logger.info(f"Suite {path.name}: {len(episodes)} episodes")
    return episodes


def world_priors(
    world: World, embeddings: EmbeddingTable, M: int = 20, source: Optional[SentenceSource] = None
) -> Dict[str, float]:
    """Label scores for the target's location clue; replay files win over the template source."""
    target = world.target
    if source is None:
        if target.id in world.sentence_files:
            source = ReplaySentenceSource(world.sentence_files[target.id])
        else:
            source = TemplateSentenceSource(embeddings)
    batch = generate_sentences(target.location_clue or target.appearance, world.map.labels, M, source)
    return {p.label: p.score for p in compute_label_priors(world.map.labels, batch, embeddings)}


@dataclass
class EpisodeResult:
    success: bool
    path_length: float
    shortest_path: float
    false_detections: int = 0
    world: str = ""
    method: str = ""
    seed: int = 0
    target_id: int = 0
    reason: str = ""
    steps: int = 0
    events: List[Dict] = field(default_factory=list)

    def __post_init__(self):
        if self.path_length < 0:
            raise ValueError("path_length must be non-negative")

    def to_row(self) -> Dict:
        row = asdict(self)
        row.pop("events")
        return row


@dataclass(frozen=True)
class Metrics:
    SR: float
    SPL: float
    SPF: float
    mean_FD: float
    episodes: int

    def to_dict(self) -> Dict:
        return asdict(self)


def compute_metrics(results: Sequence[EpisodeResult]) -> Metrics:
    """
    SR, SPL = mean S * l / max(p, l), SPF = mean S / (1 + FD) and the mean false detection count.
    SPF is not a standard metric: it discounts each success by the number of feedback requests that
    preceded it.
    """
    if not results:
        raise ValueError("No episode results to summarise")
    success = np.array([float(r.success) for r in results])
    shortest = np.array([r.shortest_path for r in results], dtype=float)
    taken = np.array([r.path_length for r in results], dtype=float)
    fd = np.array([r.false_detections for r in results], dtype=float)
    bad = ~(np.isfinite(shortest) & (shortest >= 0))
    if bad.any():
        first = results[int(np.argmax(bad))]
        raise MetricsError(
            f"Episode {first.world or '?'}/{first.method or '?'} seed {first.seed} has shortest path "
            f"{first.shortest_path}; {int(bad.sum())} of {len(results)} results are unusable"
        )
    longest = np.maximum(taken, shortest)
    ratio = np.divide(shortest, longest, out=np.ones_like(shortest), where=longest > 0)
    return Metrics(
        SR=float(success.mean()),
        SPL=float((success * ratio).mean()),
        SPF=float((success / (1.0 + fd)).mean()),
        mean_FD=float(fd.mean()),
        episodes=len(results),
    )


_RESULT_COLUMNS = [
    "world",
    "method",
    "seed",
    "target_id",
    "success",
    "path_length",
    "shortest_path",
    "false_detections",
    "steps",
    "reason",
]


def results_frame(results: Sequence[EpisodeResult]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in results], columns=_RESULT_COLUMNS)


def results_from_frame(frame: pd.DataFrame) -> List[EpisodeResult]:
    missing = {"success", "path_length", "shortest_path"} - set(frame.columns)
    if missing:
        raise ValueError(f"Results table lacks columns {sorted(missing)}")
    out = []
    for row in frame.to_dict(orient="records"):
        success = row["success"]
        if isinstance(success, str):
            success = success.strip().lower() in ("true", "1", "yes")
        out.append(
            EpisodeResult(
                success=bool(success),
                path_length=float(row["path_length"]),
                shortest_path=float(row["shortest_path"]),
                false_detections=int(row.get("false_detections", 0) or 0),
                world=str(row.get("world", "")),
                method=str(row.get("method", "")),
                seed=int(row.get("seed", 0) or 0),
                target_id=int(row.get("target_id", 0) or 0),
                reason=str(row.get("reason", "") if not pd.isna(row.get("reason", "")) else ""),
                steps=int(row.get("steps", 0) or 0),
            )
        )
    return out


class _Motion(object):
    """Grid shortest-path follower with one sparse graph per floor."""

    def __init__(self, annotated_map: AnnotatedMap):
        self.map = annotated_map
        self.graphs = [GridGraph(grid, annotated_map.resolution) for grid in annotated_map.grids]

    def free_cell(self, x: float, y: float, floor: int):
        grid = self.map.grid(floor)
        cell = self.map.world_to_cell(x, y)
        if self.map.in_bounds(*cell) and grid[cell] == FREE:
            return cell
        return nearest_free_cell(grid, cell)

    def travel(self, pose: Waypoint, target: Waypoint):
        """(cells, metres, arrival pose) or None when the target cannot be reached."""
        start = self.free_cell(pose.x, pose.y, target.z)
        goal = self.free_cell(target.x, target.y, target.z)
        if start is None or goal is None:
            return None
        cells = self.graphs[target.z].path(start, goal)
        if cells is None:
            return None
        length = path_length(cells, self.map.resolution) + FLOOR_CHANGE_COST * abs(target.z - pose.z)
        if goal == self.map.world_to_cell(target.x, target.y):
            arrival = target
        else:
            x, y = self.map.cell_center(*goal)
            arrival = Waypoint(x, y, target.z, target.theta)
        return cells, length, arrival

    def swept_visibility(self, cells, floor: int, sensor: SensorModel, every: int = 4) -> np.ndarray:
        """Cells seen while driving along `cells`, looking along the direction of travel."""
        seen = np.zeros(self.map.shape, dtype=bool)
        for i in range(0, len(cells) - 1, every):
            (r0, c0), (r1, c1) = cells[i], cells[min(i + every, len(cells) - 1)]
            x, y = self.map.cell_center(r0, c0)
            heading = math.atan2(r1 - r0, c1 - c0)
            seen |= visible_cells(self.map, Waypoint(x, y, floor, heading), sensor)
        return seen


def shortest_path_length(world: World, standoff: float = 5.0) -> float:
    """Grid shortest path from the start to the nearest free cell within `standoff` of the target."""
    target = world.target
    motion = _Motion(world.map)
    start = motion.free_cell(world.robot.x, world.robot.y, target.floor)
    if start is None:
        return math.inf
    xs, ys = world.map.cell_centers()
    mask = (np.hypot(xs - target.pose.x, ys - target.pose.y) <= standoff) & (world.map.grid(target.floor) == FREE)
    _, distance = motion.graphs[target.floor].nearest_in_mask(start, mask)
    return distance + FLOOR_CHANGE_COST * abs(target.floor - world.robot.z)


def _log(events: List[Dict], path: float, kind: str, pose: Waypoint, payload: Dict) -> None:
    events.append(dict(t=round(path / SEARCH_SPEED, 6), kind=kind, pose=pose.to_dict(), payload=payload))


def run_search_episode(
    world: World,
    config: SearchConfig = SearchConfig(),
    method: Union[Method, str] = Method.Proposed,
    seed: int = 0,
    sensor: SensorModel = SensorModel(),
    priors: Optional[Mapping[str, float]] = None,
    max_steps: int = MAX_STEPS,
) -> EpisodeResult:
    """One search episode; a pure function of its arguments."""
    method = method if isinstance(method, Method) else Method.parse(method)
    rng = np.random.default_rng(seed)
    target = world.target
    motion = _Motion(world.map)
    agent = SearchAgent(
        world.map, config, method.use_prior, method.indirect, priors if method.use_prior else None, start=world.robot
    )

    def look(pose: Waypoint, visible: np.ndarray, feedback: Optional[bool]) -> Observation:
        query = target.appearance if agent.wants_text_query else None
        detections = tuple(observe(world.persons, world.map, pose, query, sensor, rng))
        for detection in detections:
            if detection.kind == DetectionKind.TextMatch:
                payload = dict(person_id=detection.person_id, position=list(detection.position))
                payload["correct"] = detection.person_id == world.target_id
                _log(events, path, "Detect", pose, payload)
        return Observation(pose=pose, path_length=path, detections=detections, visible=visible, feedback=feedback)

    events: List[Dict] = []
    pose, path, reason, success = world.robot, 0.0, "step limit", False
    observation = look(pose, visible_cells(world.map, pose, sensor), None)
    steps = 0
    for steps in range(1, max_steps + 1):
        event = agent.step(observation)
        _log(events, path, event.kind.value, pose, event.payload())
        if event.kind == EventKind.DeclareSuccess:
            distance = math.hypot(pose.x - target.pose.x, pose.y - target.pose.y)
            success = event.person_id == world.target_id and distance <= config.standoff + 1e-6 and pose.z == target.floor
            reason = "found" if success else "declared too far"
            break
        if event.kind == EventKind.DeclareFailure:
            reason = event.purpose
            break
        if event.kind == EventKind.AskFeedback:
            feedback = event.person_id == world.target_id
            observation = look(pose, None, feedback)
            continue

        moved = motion.travel(pose, event.waypoint)
        if moved is None:
            logger.warning(f"Waypoint ({event.waypoint.x:.2f}, {event.waypoint.y:.2f}) is unreachable; skipped")
            observation = look(pose, None, None)
            continue
        cells, length, pose = moved
        path += length
        seen = motion.swept_visibility(cells, pose.z, sensor) | visible_cells(world.map, pose, sensor)
        observation = look(pose, seen, None)

    return EpisodeResult(
        success=success,
        path_length=path,
        shortest_path=shortest_path_length(world, config.standoff),
        false_detections=agent.false_detections,
        world=world.name,
        method=method.value,
        seed=seed,
        target_id=world.target_id,
        reason=reason,
        steps=steps,
        events=events,
    )


def run_search_suite(
    worlds: Sequence[World],
    config: SearchConfig = SearchConfig(),
    methods: Sequence[Union[Method, str]] = tuple(Method),
    seed: int = 0,
    jobs: int = 1,
    sensor: SensorModel = SensorModel(),
    embeddings: Optional[EmbeddingTable] = None,
    priors: Optional[Sequence[Mapping[str, float]]] = None,
) -> List[EpisodeResult]:
    """
    Every method on every world; episode i runs with seed `seed + i` for all methods. Results come
    back in (world, method) order whatever the number of jobs.
    """
    methods = [m if isinstance(m, Method) else Method.parse(m) for m in methods]
    if priors is None:
        if embeddings is None:
            raise ValueError("Either priors or an embedding table is required")
        priors = [world_priors(world, embeddings, config.M) for world in worlds]
    tasks = [
        delayed(run_search_episode)(world, config, method, seed + index, sensor, priors[index])
        for index, world in enumerate(worlds)
        for method in methods
    ]
    logger.info(f"Running {len(tasks)} search episodes on {jobs} job(s)")
    return list(Parallel(n_jobs=jobs)(tasks))


def constant_speed_trajectory(path, speed: float) -> Trajectory:
    samples, t = [], 0.0
    for i, (x, y, theta) in enumerate(path):
        if i > 0:
            t += max(math.hypot(x - path[i - 1][0], y - path[i - 1][1]) / speed, 1e-3)
        samples.append(TrajectorySample(t=t, pose=Pose2D(x, y, theta), v=speed))
    return Trajectory(samples=tuple(samples), frame="world")


def run_approach_episode(
    world: World,
    method: Union[ApproachMethod, str],
    fields: Mapping[str, RewardField],
    params: PlannerParams = PlannerParams(),
    seed: int = 0,
    min_distance: float = 5.0,
) -> Tuple[EpisodeResult, Trajectory]:
    """
    Approach the target from the robot's pose. Hybrid plans on the blended field, LfD on the
    demonstration field, KD on the language field; Baseline drives straight to the goal radius.
    """
    method = method if isinstance(method, ApproachMethod) else ApproachMethod.parse(method)
    human = world.target.pose
    start = world.robot.pose
    distance = start.distance_to(human)
    if distance < min_distance - 1e-9:
        raise EpisodeError(f"The robot starts {distance:.2f} m from the person; at least {min_distance} m required")
    floor = world.robot.z

    if method == ApproachMethod.Baseline:
        heading = math.atan2(human.y - start.y, human.x - start.x)
        trajectory = constant_speed_trajectory(straight_path(start, human, params.goal_radius, heading), BASELINE_SPEED)
    else:
        w_r = dict(hybrid=params.w_r, lfd=1.0, kd=0.0)[method.value]
        reward = blend(fields["R_I"], fields["R_L"], w_r)
        g = gaze_flag(human.theta, (human.x, human.y), (start.x, start.y))
        request = PlanRequest(start=start, human=human, gaze=g, map=world.map, reward=reward, floor=floor)
        trajectory = plan(request, params, np.random.default_rng(seed))

    xy = trajectory.xy
    collision_free = all(segment_free(world.map, a, b, floor) for a, b in zip(xy[:-1], xy[1:]))
    final = float(np.hypot(*(xy[-1] - human.xy)))
    success = collision_free and final <= params.goal_radius + 1e-9
    events = [dict(t=s.t, kind="Waypoint", pose=s.pose.to_dict(), payload=dict(v=s.v)) for s in trajectory.samples]
    result = EpisodeResult(
        success=success,
        path_length=trajectory.length,
        shortest_path=max(distance - params.goal_radius, 0.0),
        world=world.name,
        method=method.value,
        seed=seed,
        target_id=world.target_id,
        reason="reached" if success else ("collision" if not collision_free else "short of goal"),
        steps=len(trajectory),
        events=events,
    )
    return result, trajectory


def _resample(xy: np.ndarray, spacing: float) -> np.ndarray:
    if len(xy) < 2:
        return xy
    seg = np.hypot(*np.diff(xy, axis=0).T)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    if arc[-1] <= 0:
        return xy[:1]
    s = np.linspace(0.0, arc[-1], max(2, int(math.ceil(arc[-1] / spacing)) + 1))
    return np.column_stack([np.interp(s, arc, xy[:, 0]), np.interp(s, arc, xy[:, 1])])


def frontal_cone_ratio(
    trajectory: Trajectory, human: Pose2D, half_angle: float = math.radians(30.0), spacing: float = 0.05
) -> float:
    """Fraction of the path, by arc length, inside the cone the person is facing."""
    points = _resample(trajectory.xy, spacing)
    bearing = np.arctan2(points[:, 1] - human.y, points[:, 0] - human.x)
    inside = np.abs(wrap_angle(bearing - human.theta)) < half_angle
    return float(inside.mean())


def heading_total_variation(trajectory: Trajectory) -> float:
    """Sum of absolute changes of the travel direction between consecutive segments."""
    steps = np.diff(trajectory.xy, axis=0)
    steps = steps[np.hypot(steps[:, 0], steps[:, 1]) > 1e-9]
    if len(steps) < 2:
        return 0.0
    headings = np.arctan2(steps[:, 1], steps[:, 0])
    return float(np.abs(wrap_angle(np.diff(headings))).sum())


def synthetic_demonstrations(n: int = 18, seed: int = 0, samples: int = 12) -> List[Demonstration]:
    """
    Scripted human-frame approaches. Even demonstrations see the person looking at the robot and come
    in from the front; odd ones come from the side. Each run starts 4-5 m out, spirals in to 0.6 m and
    slows from 0.65 to 0.15 m/s.
    """
    rng = np.random.default_rng(seed)
    demos = []
    for index in range(n):
        g = 1 if index % 2 == 0 else 0
        side = 1.0 if rng.random() < 0.5 else -1.0
        r0 = rng.uniform(4.0, 5.0)
        if g:
            phi0, phi1 = rng.uniform(-0.5, 0.5), rng.uniform(-0.15, 0.15)
        else:
            phi0, phi1 = side * rng.uniform(0.9, 1.6), side * rng.uniform(1.2, 1.5)
        s = np.linspace(0.0, 1.0, samples)
        r = r0 + (0.6 - r0) * s
        phi = phi0 + (phi1 - phi0) * s
        x, y = r * np.cos(phi), r * np.sin(phi)
        dx, dy = np.gradient(x), np.gradient(y)
        theta = np.arctan2(dy, dx)
        v = 0.65 - 0.5 * s
        demos.append(
            Demonstration(states=tuple(ApproachState(float(a), float(b), float(c), g, float(d)) for a, b, c, d in zip(x, y, theta, v)))
        )
    return demos
