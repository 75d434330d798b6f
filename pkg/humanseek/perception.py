"""
Simulated perception: person visibility with grid occlusion, the general-person and text-conditioned
detectors, bounding boxes from activation maps, the gaze rule and the yes/no question interface.
"""
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd

from humanseek.core import OCCUPIED
from humanseek.core import AnnotatedMap
from humanseek.core import Pose2D
from humanseek.core import Waypoint
from humanseek.core import wrap_angle
from humanseek.gridmap import line_of_sight
from humanseek.prior import tokenize

__all__ = [
    "GAZE_THRESHOLD_DEG",
    "DetectionKind",
    "Detection",
    "ActivationMap",
    "SensorModel",
    "Person",
    "bbox_from_activation",
    "load_activation_csv",
    "gaze_flag",
    "is_visible",
    "visible_cells",
    "observe",
    "build_vqa_question",
    "parse_vqa_answer",
]

GAZE_THRESHOLD_DEG = 40.0


class DetectionKind(str, Enum):
    GeneralPerson = "GeneralPerson"
    TextMatch = "TextMatch"


@dataclass(frozen=True)
class Detection:
    bbox: Tuple[float, float, float, float]
    kind: DetectionKind
    person_id: Optional[int] = None
    score: float = 1.0
    position: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        x1, y1, x2, y2 = self.bbox
        if x1 > x2 or y1 > y2:
            raise ValueError(f"Malformed bounding box {self.bbox}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"Detection score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class ActivationMap:
    values: np.ndarray
    threshold: float = 0.5

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or not np.isfinite(values).all():
            raise ValueError("Activation maps must be finite 2D arrays")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class SensorModel:
    fov: float = 2.0 * math.pi / 3.0
    range: float = 8.0
    p_fp: float = 0.0
    p_fn: float = 0.0

    def __post_init__(self):
        for name in ("p_fp", "p_fn"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.fov <= 0 or self.range <= 0:
            raise ValueError("fov and range must be positive")


@dataclass(frozen=True)
class Person:
    id: int
    pose: Pose2D
    appearance: str
    location_clue: str = ""
    floor: int = 0

    def to_dict(self):
        return dict(
            id=self.id,
            appearance=self.appearance,
            location_clue=self.location_clue,
            floor=self.floor,
            **self.pose.to_dict(),
        )


def bbox_from_activation(activation: ActivationMap) -> Optional[Detection]:
    """
    Tightest box around the cells whose value exceeds the threshold. Cells are addressed (x, y) with
    x the column and y the row of `values`.
    """
    rows, cols = np.nonzero(activation.values > activation.threshold)
    if rows.size == 0:
        return None
    score = float(np.clip(activation.values[rows, cols].max(), 0.0, 1.0))
    bbox = (int(cols.min()), int(rows.min()), int(cols.max()), int(rows.max()))
    return Detection(bbox=bbox, kind=DetectionKind.TextMatch, score=score)


def load_activation_csv(path: Union[str, Path], threshold: float = 0.5) -> ActivationMap:
    values = pd.read_csv(path, header=None).to_numpy(dtype=float)
    return ActivationMap(values=values, threshold=threshold)


def gaze_flag(person_heading: float, person_pos: Sequence[float], robot_pos: Sequence[float]) -> int:
    """1 iff the person's heading is within (strictly) 40 degrees of the bearing towards the robot."""
    bearing = math.atan2(robot_pos[1] - person_pos[1], robot_pos[0] - person_pos[0])
    offset = abs(math.degrees(wrap_angle(person_heading - bearing)))
    return int(offset < GAZE_THRESHOLD_DEG - 1e-9)


def is_visible(annotated_map: AnnotatedMap, robot: Waypoint, person: Person, sensor: SensorModel) -> bool:
    if person.floor != robot.z:
        return False
    dx, dy = person.pose.x - robot.x, person.pose.y - robot.y
    distance = math.hypot(dx, dy)
    if distance > sensor.range:
        return False
    if distance > 0 and abs(wrap_angle(math.atan2(dy, dx) - robot.theta)) > sensor.fov / 2.0:
        return False
    start = annotated_map.world_to_cell(robot.x, robot.y)
    end = annotated_map.world_to_cell(person.pose.x, person.pose.y)
    return line_of_sight(annotated_map.grid(robot.z), start, end)


def visible_cells(annotated_map: AnnotatedMap, robot: Waypoint, sensor: SensorModel) -> np.ndarray:
    """Cells inside the field of view with a clear ray from the robot; occupied cells hit by a ray are included."""
    grid = annotated_map.grid(robot.z)
    xs, ys = annotated_map.cell_centers()
    dx, dy = xs - robot.x, ys - robot.y
    dist = np.hypot(dx, dy)
    in_fov = np.abs(wrap_angle(np.arctan2(dy, dx) - robot.theta)) <= sensor.fov / 2.0
    candidates = (dist <= sensor.range) & (in_fov | (dist < annotated_map.resolution))
    rows, cols = np.nonzero(candidates)
    if rows.size == 0:
        return candidates

    step = annotated_map.resolution / 2.0
    n_samples = max(2, int(math.ceil(sensor.range / step)))
    fractions = np.linspace(0.0, 1.0, n_samples, endpoint=False)[1:]
    # Sample points strictly before the target cell centre
    px = robot.x + fractions[None, :] * dx[rows, cols][:, None]
    py = robot.y + fractions[None, :] * dy[rows, cols][:, None]
    ox, oy = annotated_map.origin
    pr = np.floor((py - oy) / annotated_map.resolution).astype(int)
    pc = np.floor((px - ox) / annotated_map.resolution).astype(int)
    pr = np.clip(pr, 0, grid.shape[0] - 1)
    pc = np.clip(pc, 0, grid.shape[1] - 1)
    own_cell = (pr == rows[:, None]) & (pc == cols[:, None])
    blocked = ((grid[pr, pc] == OCCUPIED) & ~own_cell).any(axis=1)
    visible = np.zeros_like(candidates)
    visible[rows[~blocked], cols[~blocked]] = True
    return visible


def _person_bbox(annotated_map: AnnotatedMap, person: Person) -> Tuple[int, int, int, int]:
    row, col = annotated_map.world_to_cell(person.pose.x, person.pose.y)
    return col, row, col, row


def observe(
    persons: Sequence[Person],
    annotated_map: AnnotatedMap,
    robot: Waypoint,
    query: Optional[str],
    sensor: SensorModel,
    rng: np.random.Generator,
) -> List[Detection]:
    """
    GeneralPerson detections for every visible person and, when `query` is given, TextMatch detections
    drawn from the sensor's false-positive/false-negative rates. One uniform draw is taken per visible
    person in id order so the result is reproducible for a seeded generator.
    """
    detections = []
    visible = [p for p in sorted(persons, key=lambda p: p.id) if is_visible(annotated_map, robot, p, sensor)]
    for person in visible:
        detections.append(
            Detection(
                bbox=_person_bbox(annotated_map, person),
                kind=DetectionKind.GeneralPerson,
                person_id=person.id,
                position=(person.pose.x, person.pose.y),
            )
        )
    if query is None:
        return detections
    for person in visible:
        u = rng.random()
        matches = person.appearance == query
        if (matches and u >= sensor.p_fn) or (not matches and u < sensor.p_fp):
            detections.append(
                Detection(
                    bbox=_person_bbox(annotated_map, person),
                    kind=DetectionKind.TextMatch,
                    person_id=person.id,
                    position=(person.pose.x, person.pose.y),
                )
            )
    return detections


def build_vqa_question(appearance: str) -> str:
    return f"Is a person {appearance}?"


def parse_vqa_answer(text: str) -> bool:
    """First yes/no token decides; anything else is a no."""
    for token in tokenize(text):
        if token == "yes":
            return True
        if token == "no":
            return False
    return False
