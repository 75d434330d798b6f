"""
Waypoint generation for human search: global label selection, the visited-waypoint filter, frontier
exploration inside the chosen area, standoff waypoints and the indirect/direct search state machine.
"""
import math
from dataclasses import asdict
from dataclasses import dataclass
from enum import Enum
from typing import Dict
from typing import List
from typing import Mapping
from typing import Optional
from typing import Sequence
from typing import Set
from typing import Tuple

import numpy as np
from loguru import logger
from scipy import ndimage

from humanseek.core import FREE
from humanseek.core import OCCUPIED
from humanseek.core import UNKNOWN
from humanseek.core import AnnotatedMap
from humanseek.core import Waypoint
from humanseek.exceptions import ExplorationExhausted
from humanseek.gridmap import nearest_free_cell
from humanseek.gridmap import reachable_mask
from humanseek.perception import Detection
from humanseek.perception import DetectionKind
from humanseek.prior import closest_reachable_position
from humanseek.prior import label_cost

__all__ = [
    "Method",
    "SearchConfig",
    "EventKind",
    "SearchEvent",
    "VisitHistory",
    "Observation",
    "SearchAgent",
    "select_next_label",
    "should_visit",
    "knowledge_grid",
    "frontier_waypoints",
    "standoff_waypoint",
]


class Method(str, Enum):
    """The four compared search methods as (use prior, indirect search) switches."""

    Proposed = "proposed"
    KnowledgePrior = "knowledge_prior"
    CowIndirect = "cow_indirect"
    Cow = "cow"

    @property
    def use_prior(self) -> bool:
        return self in (Method.Proposed, Method.KnowledgePrior)

    @property
    def indirect(self) -> bool:
        return self in (Method.Proposed, Method.CowIndirect)

    @classmethod
    def parse(cls, name: str) -> "Method":
        key = name.strip().lower().replace("-", "_")
        for method in cls:
            if method.value == key or method.name.lower() == key:
                return method
        raise ValueError(f"Unknown search method '{name}' (choose from {[m.value for m in cls]})")


@dataclass(frozen=True)
class SearchConfig:
    w_e: float = 30.0
    t_g: float = 2.0
    standoff: float = 5.0
    max_path: float = 30.0
    max_false_detections: int = 5
    M: int = 20
    clamp_prior: bool = True
    min_frontier_cells: int = 3

    def __post_init__(self):
        for name in ("t_g", "standoff", "max_path", "max_false_detections", "M"):
            if not getattr(self, name) > 0:
                raise ValueError(f"SearchConfig.{name} must be positive")
        if self.w_e < 0:
            raise ValueError("SearchConfig.w_e must be non-negative")

    @classmethod
    def real_world(cls, **kwargs) -> "SearchConfig":
        return cls(**{**dict(max_path=30.0, max_false_detections=5), **kwargs})

    @classmethod
    def simulation(cls, **kwargs) -> "SearchConfig":
        return cls(**{**dict(max_path=15.0, max_false_detections=3), **kwargs})

    def to_dict(self) -> Dict:
        return asdict(self)


class EventKind(str, Enum):
    MoveTo = "MoveTo"
    AskFeedback = "AskFeedback"
    DeclareSuccess = "DeclareSuccess"
    DeclareFailure = "DeclareFailure"


@dataclass(frozen=True)
class SearchEvent:
    kind: EventKind
    waypoint: Optional[Waypoint] = None
    person_id: Optional[int] = None
    purpose: str = ""
    label: Optional[str] = None

    def payload(self) -> Dict:
        out = dict(purpose=self.purpose)
        if self.waypoint is not None:
            out["waypoint"] = self.waypoint.to_dict()
        if self.person_id is not None:
            out["person_id"] = self.person_id
        if self.label is not None:
            out["label"] = self.label
        return out


class VisitHistory(object):
    """Append-only list of visited waypoints."""

    def __init__(self, waypoints: Sequence[Waypoint] = ()):
        self._waypoints: List[Waypoint] = list(waypoints)

    def append(self, waypoint: Waypoint) -> None:
        self._waypoints.append(waypoint)

    @property
    def waypoints(self) -> Tuple[Waypoint, ...]:
        return tuple(self._waypoints)

    def __len__(self) -> int:
        return len(self._waypoints)

    def min_distance(self, candidate: Waypoint) -> float:
        distances = [candidate.distance_to(p) for p in self._waypoints if p.z == candidate.z]
        return min(distances) if distances else math.inf


def should_visit(candidate: Waypoint, history: VisitHistory, t_g: float) -> bool:
    """True iff every visited waypoint on the same floor is strictly farther than `t_g`."""
    return history.min_distance(candidate) > t_g


def select_next_label(costs: Mapping[str, float], visited_labels: Set[str]) -> str:
    """Cheapest unvisited label with finite cost; ties go to the lexicographically smallest label."""
    candidates = sorted((cost, label) for label, cost in costs.items() if label not in visited_labels and math.isfinite(cost))
    if not candidates:
        raise ExplorationExhausted("No unvisited label with finite cost is left")
    return candidates[0][1]


def knowledge_grid(grid: np.ndarray, seen: np.ndarray, area: Optional[np.ndarray] = None) -> np.ndarray:
    """Occupancy as known to the robot: unseen cells unknown, cells outside `area` occupied."""
    known = np.where(seen, grid, UNKNOWN).astype(np.int8)
    if area is not None:
        known[~area] = OCCUPIED
    return known


def frontier_waypoints(
    grid: np.ndarray,
    robot,
    resolution: float = 1.0,
    origin: Tuple[float, float] = (0.0, 0.0),
    floor: int = 0,
    min_cluster: int = 3,
) -> List[Waypoint]:
    """
    Centroids of frontier clusters (known-free cells 4-adjacent to unknown cells, grouped with
    8-connectivity, clusters below `min_cluster` cells dropped), nearest first. A centroid falling
    outside its cluster is replaced by the cluster cell closest to it. Waypoint headings point along
    the travel direction from the robot.
    """
    free = grid == FREE
    unknown = grid == UNKNOWN
    near_unknown = np.zeros_like(unknown)
    near_unknown[1:, :] |= unknown[:-1, :]
    near_unknown[:-1, :] |= unknown[1:, :]
    near_unknown[:, 1:] |= unknown[:, :-1]
    near_unknown[:, :-1] |= unknown[:, 1:]
    frontier = free & near_unknown
    labels, n_clusters = ndimage.label(frontier, structure=np.ones((3, 3), dtype=int))

    ox, oy = origin
    waypoints = []
    for index in range(1, n_clusters + 1):
        rows, cols = np.nonzero(labels == index)
        if rows.size < min_cluster:
            continue
        xs = ox + (cols + 0.5) * resolution
        ys = oy + (rows + 0.5) * resolution
        cx, cy = float(xs.mean()), float(ys.mean())
        crow, ccol = int(math.floor((cy - oy) / resolution)), int(math.floor((cx - ox) / resolution))
        inside = 0 <= crow < grid.shape[0] and 0 <= ccol < grid.shape[1] and labels[crow, ccol] == index
        if not inside:
            nearest = int(np.argmin((xs - cx) ** 2 + (ys - cy) ** 2))
            cx, cy = float(xs[nearest]), float(ys[nearest])
        heading = math.atan2(cy - robot.y, cx - robot.x) if (cx, cy) != (robot.x, robot.y) else robot.theta
        waypoints.append(Waypoint(cx, cy, floor, heading))
    return sorted(waypoints, key=lambda w: math.hypot(w.x - robot.x, w.y - robot.y))


def standoff_waypoint(
    person_pos: Sequence[float],
    robot,
    standoff: float,
    annotated_map: Optional[AnnotatedMap] = None,
    floor: int = 0,
) -> Waypoint:
    """
    Point on the person-to-robot ray at exactly `standoff` metres from the person, facing the person.
    When that point is not free on `annotated_map`, the free cell within `standoff` of the person
    closest to it is used instead.
    """
    px, py = float(person_pos[0]), float(person_pos[1])
    dx, dy = robot.x - px, robot.y - py
    norm = math.hypot(dx, dy)
    if norm == 0:
        raise ValueError("The robot stands on the person; the standoff direction is undefined")
    x, y = px + standoff * dx / norm, py + standoff * dy / norm
    if annotated_map is not None and not annotated_map.is_free(x, y, floor):
        xs, ys = annotated_map.cell_centers()
        within = np.hypot(xs - px, ys - py) <= standoff
        cell = nearest_free_cell(annotated_map.grid(floor), annotated_map.world_to_cell(x, y), mask=within)
        if cell is not None:
            x, y = annotated_map.cell_center(*cell)
    return Waypoint(x, y, floor, math.atan2(py - y, px - x))


@dataclass(frozen=True)
class Observation:
    """What the robot reports after executing the previous event."""

    pose: Waypoint
    path_length: float = 0.0
    detections: Tuple[Detection, ...] = ()
    visible: Optional[np.ndarray] = None
    feedback: Optional[bool] = None


@dataclass
class _Pending:
    verify: Optional[int] = None
    ask: Optional[int] = None
    feedback: Optional[int] = None


class SearchAgent(object):
    """
    Single-episode search state machine. Call `step` with each new observation; it returns the next
    event and appends every emitted MoveTo target to the visit history.

    Indirect search moves to a standoff waypoint in front of every newly seen person and only then asks
    the text detector about that person. Direct search asks the text detector on every observation and
    walks straight up to a positive match that is farther away than the standoff distance.
    """

    def __init__(
        self,
        annotated_map: AnnotatedMap,
        config: SearchConfig,
        use_prior: bool,
        indirect: bool,
        priors: Optional[Mapping[str, float]] = None,
        start: Optional[Waypoint] = None,
    ):
        self.map = annotated_map
        self.config = config
        self.use_prior = use_prior
        self.indirect = indirect
        self.priors = dict(priors or {})
        self.history = VisitHistory([start] if start is not None else [])
        self.visited_labels: Set[str] = set()
        self.current_label: Optional[str] = None
        self.examined: Set[int] = set()
        self.false_detections = 0
        self.finished = False
        self.pose: Optional[Waypoint] = start
        self.path_length = 0.0
        self.seen = [np.zeros(grid.shape, dtype=bool) for grid in annotated_map.grids]
        self._pending = _Pending()

    @property
    def wants_text_query(self) -> bool:
        """Whether the next observation should include the text-conditioned detector."""
        return not self.indirect or self._pending.verify is not None

    def step(self, observation: Observation) -> SearchEvent:
        if self.finished:
            raise RuntimeError("The episode has already ended")
        self.pose = observation.pose
        self.path_length = observation.path_length
        if observation.visible is not None:
            self.seen[self.pose.z] |= observation.visible

        if self.path_length > self.config.max_path:
            return self._finish(SearchEvent(EventKind.DeclareFailure, purpose="path budget"))

        if self._pending.feedback is not None:
            person_id, self._pending.feedback = self._pending.feedback, None
            if observation.feedback:
                return self._finish(SearchEvent(EventKind.DeclareSuccess, person_id=person_id))
            self.false_detections += 1
            self.examined.add(person_id)
            logger.debug(f"Person {person_id} rejected, {self.false_detections} false detections")
        if self.false_detections >= self.config.max_false_detections:
            return self._finish(SearchEvent(EventKind.DeclareFailure, purpose="false detection budget"))

        if self._pending.ask is not None:
            person_id, self._pending.ask = self._pending.ask, None
            return self._ask(person_id)

        event = self._indirect_step(observation) if self.indirect else self._direct_step(observation)
        if event is not None:
            return event
        return self._explore()

    def _finish(self, event: SearchEvent) -> SearchEvent:
        self.finished = True
        return event

    def _ask(self, person_id: int) -> SearchEvent:
        self._pending.feedback = person_id
        return SearchEvent(EventKind.AskFeedback, person_id=person_id)

    def _move(self, waypoint: Waypoint, purpose: str, person_id: Optional[int] = None) -> SearchEvent:
        self.history.append(waypoint)
        return SearchEvent(EventKind.MoveTo, waypoint=waypoint, person_id=person_id, purpose=purpose, label=self.current_label)

    def _nearest(self, detections: Sequence[Detection]) -> Optional[Detection]:
        candidates = [d for d in detections if d.person_id not in self.examined and d.position is not None]
        if not candidates:
            return None
        return min(candidates, key=lambda d: (math.hypot(d.position[0] - self.pose.x, d.position[1] - self.pose.y), d.person_id))

    def _indirect_step(self, observation: Observation) -> Optional[SearchEvent]:
        if self._pending.verify is not None:
            person_id, self._pending.verify = self._pending.verify, None
            if any(d.kind == DetectionKind.TextMatch and d.person_id == person_id for d in observation.detections):
                return self._ask(person_id)
            self.examined.add(person_id)

        general = [d for d in observation.detections if d.kind == DetectionKind.GeneralPerson]
        detection = self._nearest(general)
        if detection is None:
            return None
        self._pending.verify = detection.person_id
        waypoint = standoff_waypoint(detection.position, self.pose, self.config.standoff, self.map, self.pose.z)
        return self._move(waypoint, "standoff", detection.person_id)

    def _direct_step(self, observation: Observation) -> Optional[SearchEvent]:
        matches = [d for d in observation.detections if d.kind == DetectionKind.TextMatch]
        detection = self._nearest(matches)
        if detection is None:
            return None
        px, py = detection.position
        if math.hypot(px - self.pose.x, py - self.pose.y) <= self.config.standoff:
            return self._ask(detection.person_id)
        waypoint = self._match_waypoint(detection.position)
        if not should_visit(waypoint, self.history, self.config.t_g):
            # already stood next to this spot
            return self._ask(detection.person_id)
        self._pending.ask = detection.person_id
        return self._move(waypoint, "approach", detection.person_id)

    def _match_waypoint(self, position: Sequence[float]) -> Waypoint:
        """Free cell nearest to a detected person, facing along the travel direction."""
        px, py = float(position[0]), float(position[1])
        x, y = px, py
        if not self.map.is_free(x, y, self.pose.z):
            cell = nearest_free_cell(self.map.grid(self.pose.z), self.map.world_to_cell(x, y))
            if cell is not None:
                x, y = self.map.cell_center(*cell)
        return Waypoint(x, y, self.pose.z, math.atan2(py - self.pose.y, px - self.pose.x))

    def _frontier(self) -> Optional[Waypoint]:
        floor = self.map.area_floor(self.current_label)
        if floor != self.pose.z:
            return None
        grid = self.map.grid(floor)
        area = self.map.area_mask(self.current_label, floor)
        known = knowledge_grid(grid, self.seen[floor], area)
        start = self.map.world_to_cell(self.pose.x, self.pose.y)
        if not self.map.in_bounds(*start) or grid[start] != FREE:
            start = nearest_free_cell(grid, start)
        reachable = reachable_mask(grid, start) if start is not None else np.zeros(grid.shape, dtype=bool)
        for waypoint in frontier_waypoints(
            known, self.pose, self.map.resolution, self.map.origin, floor, self.config.min_frontier_cells
        ):
            if not reachable[self.map.world_to_cell(waypoint.x, waypoint.y)]:
                continue
            if should_visit(waypoint, self.history, self.config.t_g):
                return waypoint
        return None

    def label_costs(self) -> Dict[str, float]:
        w_e = self.config.w_e if self.use_prior else 0.0
        return {
            label: label_cost(self.pose, label, self.map, self.priors.get(label, 0.0), w_e, self.config.clamp_prior)
            for label in self.map.labels
            if label not in self.visited_labels
        }

    def _area_heading(self, label: str, waypoint: Waypoint) -> float:
        vertices = np.array([p for area in self.map.areas_with_label(label) for p in area.polygon])
        cx, cy = vertices.mean(axis=0)
        if math.hypot(cx - waypoint.x, cy - waypoint.y) < 1e-9:
            return waypoint.theta
        return math.atan2(cy - waypoint.y, cx - waypoint.x)

    def _explore(self) -> SearchEvent:
        while True:
            if self.current_label is not None:
                waypoint = self._frontier()
                if waypoint is not None:
                    return self._move(waypoint, "frontier")
                logger.debug(f"Local search of '{self.current_label}' finished")
                self.current_label = None

            try:
                label = select_next_label(self.label_costs(), self.visited_labels)
            except ExplorationExhausted:
                return self._finish(SearchEvent(EventKind.DeclareFailure, purpose="exploration exhausted"))
            self.visited_labels.add(label)
            self.current_label = label
            target, _ = closest_reachable_position(self.pose, label, self.map)
            target = Waypoint(target.x, target.y, target.z, self._area_heading(label, target))
            if should_visit(target, self.history, self.config.t_g):
                return self._move(target, "label")
