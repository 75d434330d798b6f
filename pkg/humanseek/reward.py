"""
Reward fields over the approach-state grid and the scaled-metric RBF kernel they are built with.

The kernel metric divides each dimension by its bin spacing (theta uses the wrapped angular difference)
and treats the gaze flag as a hard factor, so k(a, b) = 0 whenever a and b differ in g. Because the
squared distance is a sum over dimensions the kernel is separable, and dense convolutions over the
grid are computed as one 1D kernel matrix per axis.
"""
from dataclasses import dataclass
from dataclasses import field
from typing import Dict
from typing import List
from typing import Optional
from typing import Union

import numpy as np
import pandas as pd

from humanseek.core import ApproachState
from humanseek.core import StateGrid
from humanseek.core import discretize_array
from humanseek.core import wrap_angle
from humanseek.exceptions import GridMismatchError

__all__ = [
    "RewardField",
    "scaled_differences",
    "kernel_matrix",
    "axis_kernels",
    "rbf_apply",
]

# Axis order of the dense arrays: (x, y, theta, g, v)
_CONTINUOUS_AXES = (0, 1, 2, 4)


def scaled_differences(a: np.ndarray, b: np.ndarray, grid: StateGrid, dim: int) -> np.ndarray:
    """Pairwise differences along `dim` divided by the bin spacing, shape (len(a), len(b))."""
    delta = np.asarray(a, dtype=float)[:, None] - np.asarray(b, dtype=float)[None, :]
    if dim == 2:
        delta = wrap_angle(delta)
    return delta / grid.spacing[dim]


def kernel_matrix(a: np.ndarray, b: np.ndarray, sigma: float, grid: StateGrid) -> np.ndarray:
    """RBF kernel exp(-d^2 / 2 sigma^2) between the rows of two (n, 5) state arrays."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    sq = np.zeros((a.shape[0], b.shape[0]))
    for dim in _CONTINUOUS_AXES:
        sq += scaled_differences(a[:, dim], b[:, dim], grid, dim) ** 2
    same_gaze = np.isclose(a[:, 3][:, None], b[:, 3][None, :])
    return np.exp(-sq / (2.0 * sigma**2)) * same_gaze


def axis_kernels(grid: StateGrid, sigma: float) -> List[np.ndarray]:
    """Per-axis kernel matrices between bin centres; the g axis gets the identity."""
    out = []
    for dim, bins in enumerate(grid.bins):
        if dim == 3:
            out.append(np.eye(len(bins)))
            continue
        d = scaled_differences(bins, bins, grid, dim)
        out.append(np.exp(-(d**2) / (2.0 * sigma**2)))
    return out


def rbf_apply(values: np.ndarray, sigma: float, grid: StateGrid) -> np.ndarray:
    """R'(x) = sum_y k(x, y) R(y) over every grid state."""
    kx, ky, kt, _, kv = axis_kernels(grid, sigma)
    return np.einsum("ax,by,ct,dv,xytgv->abcgd", kx, ky, kt, kv, values, optimize=True)


@dataclass
class RewardField:
    """Dense reward values over `grid`, array axes ordered (x, y, theta, g, v)."""

    values: np.ndarray
    grid: StateGrid = field(default_factory=StateGrid)
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(f"Reward values of shape {self.values.shape} do not fit grid {self.grid.shape}")
        if not np.isfinite(self.values).all():
            raise ValueError("Reward values must be finite")

    @classmethod
    def zeros(cls, grid: Optional[StateGrid] = None, **meta) -> "RewardField":
        grid = StateGrid() if grid is None else grid
        return cls(values=np.zeros(grid.shape), grid=grid, meta=dict(meta))

    def check_compatible(self, other: "RewardField") -> None:
        if self.grid != other.grid:
            raise GridMismatchError("Reward fields are defined on different state grids")

    def lookup(self, states: Union[ApproachState, np.ndarray]) -> Union[float, np.ndarray]:
        """Nearest-bin value for one ApproachState or an (N, 5) array of states."""
        if isinstance(states, ApproachState):
            return float(self.values[tuple(discretize_array(states.as_vector(), self.grid)[0])])
        index = discretize_array(states, self.grid)
        return self.values[tuple(index.T)]

    def slice(self, g: int, v_index: Optional[int] = None) -> np.ndarray:
        """(x, y) plane at gaze `g`, maximised over theta and, unless given, over v."""
        plane = self.values[:, :, :, list(self.grid.g_bins).index(g), :]
        plane = plane.max(axis=2)
        return plane.max(axis=-1) if v_index is None else plane[:, :, v_index]

    def slice_frame(self, g: int, v_index: Optional[int] = None) -> pd.DataFrame:
        """Long-format slice for CSV dumps: one row per (x, y) bin."""
        plane = self.slice(g, v_index)
        xs, ys = np.meshgrid(self.grid.x_bins, self.grid.y_bins, indexing="ij")
        return pd.DataFrame(dict(x=xs.ravel(), y=ys.ravel(), reward=plane.ravel()))

    def argmax_state(self) -> np.ndarray:
        index = np.unravel_index(int(np.argmax(self.values)), self.grid.shape)
        return np.array([self.grid.bins[d][i] for d, i in enumerate(index)], dtype=float)

    def to_dict(self) -> Dict:
        return dict(grid=self.grid.to_dict(), shape=list(self.values.shape), values=self.values.tolist(), meta=self.meta)

    @classmethod
    def from_dict(cls, data: Dict) -> "RewardField":
        try:
            grid = StateGrid.from_dict(data["grid"])
            values = np.asarray(data["values"], dtype=float)
        except (KeyError, TypeError, ValueError) as ex:
            raise GridMismatchError(f"Malformed reward field: {ex}")
        return cls(values=values, grid=grid, meta=dict(data.get("meta", {})))
