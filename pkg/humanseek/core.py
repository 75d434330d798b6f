"""
Geometric and state-space types shared by every module: poses, waypoints, the annotated map, the
relative approach state and its discretisation grid, and trajectories.

Grid convention: ``grid[row, col]`` with ``row`` indexing y and ``col`` indexing x; the cell
``(row, col)`` covers ``[ox + col * res, ox + (col + 1) * res) x [oy + row * res, oy + (row + 1) * res)``.
"""
import base64
import json
import math
from dataclasses import dataclass
from dataclasses import field
from functools import cached_property
from pathlib import Path
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
from matplotlib.path import Path as MplPath

from humanseek.exceptions import MapFormatError

__all__ = [
    "FREE",
    "OCCUPIED",
    "UNKNOWN",
    "FLOOR_CHANGE_COST",
    "wrap_angle",
    "Pose2D",
    "Waypoint",
    "Area",
    "AnnotatedMap",
    "ApproachState",
    "StateGrid",
    "TrajectorySample",
    "Trajectory",
    "to_human_frame",
    "from_human_frame",
    "discretize",
    "discretize_array",
    "polygon_is_simple",
    "load_map",
    "map_from_dict",
    "map_to_dict",
]

FREE = 0
OCCUPIED = 1
UNKNOWN = -1

# Metres of path charged per floor level changed.
FLOOR_CHANGE_COST = 5.0


def wrap_angle(angle):
    """Wrap an angle (scalar or array) to (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2.0 * np.pi)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def distance_to(self, other: Union["Pose2D", "Waypoint", Sequence[float]]) -> float:
        ox, oy = (other.x, other.y) if hasattr(other, "x") else (other[0], other[1])
        return math.hypot(self.x - ox, self.y - oy)

    def to_dict(self) -> Dict[str, float]:
        return dict(x=self.x, y=self.y, theta=self.theta)

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> "Pose2D":
        return cls(x=data["x"], y=data["y"], theta=data.get("theta", 0.0))


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    z: int = 0
    theta: float = 0.0

    def __post_init__(self):
        if int(self.z) != self.z or self.z < 0:
            raise ValueError(f"Waypoint floor must be a non-negative integer, got {self.z}")
        object.__setattr__(self, "z", int(self.z))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def pose(self) -> Pose2D:
        return Pose2D(self.x, self.y, self.theta)

    def distance_to(self, other) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def to_dict(self) -> Dict[str, float]:
        return dict(x=self.x, y=self.y, z=self.z, theta=self.theta)


@dataclass(frozen=True)
class Area:
    label: str
    polygon: Tuple[Tuple[float, float], ...]
    floor: int = 0

    def __post_init__(self):
        if not self.label or not self.label.strip():
            raise MapFormatError("Area labels must be non-empty")
        object.__setattr__(self, "polygon", tuple((float(x), float(y)) for x, y in self.polygon))
        if len(self.polygon) < 3:
            raise MapFormatError(f"Area '{self.label}' needs at least three vertices")
        if not polygon_is_simple(self.polygon):
            raise MapFormatError(f"Area '{self.label}' polygon is self-intersecting")


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        value = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(value) < 1e-12 else (1 if value > 0 else -1)

    def on_segment(a, b, c):
        return min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12 and min(a[1], b[1]) - 1e-12 <= c[
            1
        ] <= max(a[1], b[1]) + 1e-12

    o1, o2, o3, o4 = orient(p1, p2, q1), orient(p1, p2, q2), orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_segment(p1, p2, q1):
        return True
    if o2 == 0 and on_segment(p1, p2, q2):
        return True
    if o3 == 0 and on_segment(q1, q2, p1):
        return True
    if o4 == 0 and on_segment(q1, q2, p2):
        return True
    return False


def polygon_is_simple(polygon: Sequence[Tuple[float, float]]) -> bool:
    """True iff no two non-adjacent edges of the closed polygon intersect."""
    n = len(polygon)
    edges = [(polygon[i], polygon[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_cross(*edges[i], *edges[j]):
                return False
    return True


@dataclass(frozen=True, eq=False)
class AnnotatedMap:
    """
    Occupancy grids (one per floor) plus labelled polygonal areas.

    Parameters
    ----------
    grids: list of 2D int arrays with values FREE (0), OCCUPIED (1) or UNKNOWN (-1)
    resolution: metres per cell
    areas: labelled polygons in world coordinates
    origin: world coordinates of the lower-left corner of cell (0, 0)
    """

    grids: Tuple[np.ndarray, ...]
    resolution: float
    areas: Tuple[Area, ...] = ()
    origin: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.resolution > 0:
            raise MapFormatError(f"Map resolution must be positive, got {self.resolution}")
        grids = tuple(np.asarray(grid, dtype=np.int8) for grid in self.grids)
        if not grids:
            raise MapFormatError("A map needs at least one floor")
        for grid in grids:
            if grid.ndim != 2 or not np.isin(grid, (FREE, OCCUPIED, UNKNOWN)).all():
                raise MapFormatError("Grids must be 2D arrays of -1/0/1")
        object.__setattr__(self, "grids", grids)
        object.__setattr__(self, "areas", tuple(self.areas))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "_masks", dict())
        for area in self.areas:
            if not 0 <= area.floor < len(grids):
                raise MapFormatError(f"Area '{area.label}' is on missing floor {area.floor}")

    @property
    def floors(self) -> int:
        return len(self.grids)

    @property
    def labels(self) -> List[str]:
        """Unique labels in declaration order."""
        return list(dict.fromkeys(area.label for area in self.areas))

    def grid(self, floor: int = 0) -> np.ndarray:
        return self.grids[floor]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.grids[0].shape

    @property
    def extent(self) -> Tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax) in world metres."""
        rows, cols = self.shape
        ox, oy = self.origin
        return ox, ox + cols * self.resolution, oy, oy + rows * self.resolution

    def world_to_cell(self, x: float, y: float) -> Tuple[int, int]:
        ox, oy = self.origin
        return int(math.floor((y - oy) / self.resolution)), int(math.floor((x - ox) / self.resolution))

    def cell_center(self, row: int, col: int) -> Tuple[float, float]:
        ox, oy = self.origin
        return ox + (col + 0.5) * self.resolution, oy + (row + 0.5) * self.resolution

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """World (x, y) of every cell centre, each shaped like the grid."""
        rows, cols = self.shape
        ox, oy = self.origin
        xs = ox + (np.arange(cols) + 0.5) * self.resolution
        ys = oy + (np.arange(rows) + 0.5) * self.resolution
        return np.meshgrid(xs, ys)

    def in_bounds(self, row: int, col: int) -> bool:
        rows, cols = self.shape
        return 0 <= row < rows and 0 <= col < cols

    def is_free(self, x: float, y: float, floor: int = 0) -> bool:
        row, col = self.world_to_cell(x, y)
        return self.in_bounds(row, col) and self.grids[floor][row, col] == FREE

    def areas_with_label(self, label: str) -> List[Area]:
        return [area for area in self.areas if area.label == label]

    def area_floor(self, label: str) -> int:
        areas = self.areas_with_label(label)
        if not areas:
            raise KeyError(f"Label '{label}' is not in the map (labels: {self.labels})")
        return areas[0].floor

    def area_mask(self, label: str, floor: Optional[int] = None) -> np.ndarray:
        """Boolean mask of cells whose centres lie inside any polygon with `label` (on `floor`). Read-only."""
        key = (label, floor)
        if key in self._masks:
            return self._masks[key]
        xs, ys = self.cell_centers()
        points = np.column_stack([xs.ravel(), ys.ravel()])
        mask = np.zeros(xs.size, dtype=bool)
        for area in self.areas_with_label(label):
            if floor is not None and area.floor != floor:
                continue
            mask |= MplPath(area.polygon).contains_points(points)
        mask = mask.reshape(xs.shape)
        mask.flags.writeable = False
        self._masks[key] = mask
        return mask

    def label_at(self, x: float, y: float, floor: int = 0) -> Optional[str]:
        for area in self.areas:
            if area.floor == floor and MplPath(area.polygon).contains_point((x, y)):
                return area.label
        return None


@dataclass(frozen=True)
class ApproachState:
    x_r_h: float
    y_r_h: float
    theta_r_h: float
    g: int
    v: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.x_r_h, self.y_r_h, self.theta_r_h, self.g, self.v], dtype=float)


def _arange_inclusive(start: float, stop: float, step: float) -> Tuple[float, ...]:
    count = int(round((stop - start) / step)) + 1
    return tuple(float(start + i * step) for i in range(count))


@dataclass(frozen=True)
class StateGrid:
    """
    Discretisation of the relative approach state, dimensions ordered (x, y, theta, g, v).

    The default bins give 25 * 13 * 8 * 2 * 3 = 15600 states; the inducing mask keeps the states whose
    (x index + theta index) is even, exactly half of them.
    """

    x_bins: Tuple[float, ...] = _arange_inclusive(-6.0, 6.0, 0.5)
    y_bins: Tuple[float, ...] = _arange_inclusive(-3.0, 3.0, 0.5)
    theta_bins: Tuple[float, ...] = tuple(-np.pi + i * np.pi / 4 for i in range(8))
    g_bins: Tuple[int, ...] = (0, 1)
    v_bins: Tuple[float, ...] = (0.15, 0.4, 0.65)

    def __post_init__(self):
        for name in ("x_bins", "y_bins", "theta_bins", "g_bins", "v_bins"):
            bins = tuple(getattr(self, name))
            if not bins or any(b >= a for a, b in zip(bins[1:], bins[:-1])):
                raise ValueError(f"{name} must be non-empty and strictly increasing")
            object.__setattr__(self, name, bins)

    @property
    def bins(self) -> Tuple[Tuple[float, ...], ...]:
        return self.x_bins, self.y_bins, self.theta_bins, self.g_bins, self.v_bins

    @property
    def shape(self) -> Tuple[int, int, int, int, int]:
        return tuple(len(b) for b in self.bins)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> np.ndarray:
        """Bin spacing per dimension; g uses 1."""

        def step(bins, default):
            return float(bins[1] - bins[0]) if len(bins) > 1 else default

        return np.array(
            [step(self.x_bins, 0.5), step(self.y_bins, 0.5), step(self.theta_bins, np.pi / 4), 1.0, step(self.v_bins, 0.25)]
        )

    @cached_property
    def states(self) -> np.ndarray:
        """All grid states as an (N, 5) array in C order of `shape`."""
        mesh = np.meshgrid(*[np.asarray(b, dtype=float) for b in self.bins], indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    @cached_property
    def inducing_mask(self) -> np.ndarray:
        ix, _, it, _, _ = np.indices(self.shape)
        return ((ix + it) % 2 == 0).ravel()

    @property
    def inducing_states(self) -> np.ndarray:
        return self.states[self.inducing_mask]

    def flat_index(self, index: Tuple[int, ...]) -> int:
        return int(np.ravel_multi_index(tuple(index), self.shape))

    def to_dict(self) -> Dict[str, List[float]]:
        return dict(
            x_bins=list(self.x_bins),
            y_bins=list(self.y_bins),
            theta_bins=list(self.theta_bins),
            g_bins=list(self.g_bins),
            v_bins=list(self.v_bins),
        )

    @classmethod
    def from_dict(cls, data: Dict[str, List[float]]) -> "StateGrid":
        return cls(
            x_bins=tuple(data["x_bins"]),
            y_bins=tuple(data["y_bins"]),
            theta_bins=tuple(data["theta_bins"]),
            g_bins=tuple(int(g) for g in data["g_bins"]),
            v_bins=tuple(data["v_bins"]),
        )


def to_human_frame(robot_pose: Pose2D, human_pose: Pose2D) -> Pose2D:
    """Express `robot_pose` in the frame where the human sits at the origin facing +x."""
    dx = robot_pose.x - human_pose.x
    dy = robot_pose.y - human_pose.y
    c, s = math.cos(human_pose.theta), math.sin(human_pose.theta)
    return Pose2D(c * dx + s * dy, -s * dx + c * dy, robot_pose.theta - human_pose.theta)


def from_human_frame(relative_pose: Pose2D, human_pose: Pose2D) -> Pose2D:
    """Inverse of `to_human_frame`."""
    c, s = math.cos(human_pose.theta), math.sin(human_pose.theta)
    x = human_pose.x + c * relative_pose.x - s * relative_pose.y
    y = human_pose.y + s * relative_pose.x + c * relative_pose.y
    return Pose2D(x, y, relative_pose.theta + human_pose.theta)


def discretize_array(states: np.ndarray, grid: StateGrid) -> np.ndarray:
    """
    Nearest-bin indices for an (N, 5) array of (x, y, theta, g, v) states. Values beyond the bin range
    clamp to the extreme bin, theta snaps by angular distance and ties go to the lower index.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    indices = np.empty(states.shape, dtype=int)
    for dim, bins in enumerate(grid.bins):
        bins = np.asarray(bins, dtype=float)
        delta = states[:, dim, None] - bins[None, :]
        if dim == 2:
            delta = wrap_angle(delta)
        indices[:, dim] = np.argmin(np.abs(delta), axis=1)
    return indices


def discretize(state: ApproachState, grid: StateGrid) -> Tuple[int, int, int, int, int]:
    return tuple(int(i) for i in discretize_array(state.as_vector()[None, :], grid)[0])


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    pose: Pose2D
    v: float

    def to_dict(self) -> Dict[str, float]:
        return dict(t=self.t, x=self.pose.x, y=self.pose.y, theta=self.pose.theta, v=self.v)


@dataclass(frozen=True)
class Trajectory:
    samples: Tuple[TrajectorySample, ...]
    frame: str = "world"

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if not self.samples:
            raise ValueError("A trajectory needs at least one sample")
        if self.frame not in ("world", "human"):
            raise ValueError(f"Unknown frame tag {self.frame}")
        times = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("Trajectory timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def poses(self) -> List[Pose2D]:
        return [s.pose for s in self.samples]

    @property
    def xy(self) -> np.ndarray:
        return np.array([[s.pose.x, s.pose.y] for s in self.samples])

    @property
    def length(self) -> float:
        xy = self.xy
        return float(np.sum(np.linalg.norm(np.diff(xy, axis=0), axis=1))) if len(xy) > 1 else 0.0

    def to_records(self) -> List[Dict[str, float]]:
        return [s.to_dict() for s in self.samples]

    @classmethod
    def from_records(cls, records: Sequence[Dict[str, float]], frame: str = "world") -> "Trajectory":
        samples = [
            TrajectorySample(t=float(r["t"]), pose=Pose2D(r["x"], r["y"], r.get("theta", 0.0)), v=float(r.get("v", 0.0)))
            for r in records
        ]
        return cls(samples=tuple(samples), frame=frame)


_ASCII_CELLS = {".": FREE, "#": OCCUPIED, "?": UNKNOWN}


def _decode_grid(entry) -> np.ndarray:
    if isinstance(entry, dict):
        try:
            raw = base64.b64decode(entry["base64"])
            return np.frombuffer(raw, dtype=np.int8).reshape(entry["shape"]).copy()
        except (KeyError, ValueError) as ex:
            raise MapFormatError(f"Malformed base64 grid: {ex}")
    if isinstance(entry, list) and entry and all(isinstance(row, str) for row in entry):
        # ASCII rows are written top (max y) first
        try:
            rows = [[_ASCII_CELLS[ch] for ch in row] for row in entry]
        except KeyError as ex:
            raise MapFormatError(f"Unknown map character {ex}")
        if len({len(row) for row in rows}) != 1:
            raise MapFormatError("ASCII grid rows must have equal length")
        return np.array(rows[::-1], dtype=np.int8)
    try:
        return np.array(entry, dtype=np.int8)
    except (TypeError, ValueError) as ex:
        raise MapFormatError(f"Malformed grid: {ex}")


def map_from_dict(data: Dict) -> AnnotatedMap:
    try:
        grids = [_decode_grid(entry) for entry in data["grids"]]
        areas = [
            Area(label=area["label"], polygon=tuple(tuple(p) for p in area["polygon"]), floor=int(area.get("floor", 0)))
            for area in data.get("areas", [])
        ]
        resolution = float(data["resolution"])
    except KeyError as ex:
        raise MapFormatError(f"Map is missing field {ex}")
    floors = int(data.get("floors", len(grids)))
    if floors != len(grids):
        raise MapFormatError(f"Map declares {floors} floors but has {len(grids)} grids")
    return AnnotatedMap(grids=tuple(grids), resolution=resolution, areas=tuple(areas), origin=tuple(data.get("origin", (0, 0))))


def map_to_dict(annotated_map: AnnotatedMap) -> Dict:
    return dict(
        resolution=annotated_map.resolution,
        floors=annotated_map.floors,
        origin=list(annotated_map.origin),
        grids=[grid.tolist() for grid in annotated_map.grids],
        areas=[dict(label=a.label, floor=a.floor, polygon=[list(p) for p in a.polygon]) for a in annotated_map.areas],
    )


def load_map(path: Union[str, Path]) -> AnnotatedMap:
    path = Path(path)
    try:
        with open(path, "r") as fil:
            data = json.load(fil)
    except json.JSONDecodeError as ex:
        raise MapFormatError(f"{path}: {ex}")
    return map_from_dict(data)
