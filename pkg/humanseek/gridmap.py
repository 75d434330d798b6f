"""
Occupancy-grid utilities: 8-connected shortest paths without corner cutting, reachability, Bresenham
ray casting and nearest-free-cell queries.
"""
import math
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from humanseek.core import FREE
from humanseek.core import OCCUPIED

__all__ = [
    "Cell",
    "GridGraph",
    "bresenham",
    "line_of_sight",
    "reachable_mask",
    "nearest_free_cell",
    "path_length",
]

Cell = Tuple[int, int]

_ORTHOGONAL = ((0, 1), (1, 0), (0, -1), (-1, 0))
_DIAGONAL = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def _shift(mask: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """out[r, c] = mask[r + dr, c + dc], False outside the grid."""
    out = np.zeros_like(mask)
    rows, cols = mask.shape
    r0, r1 = max(0, -dr), min(rows, rows - dr)
    c0, c1 = max(0, -dc), min(cols, cols - dc)
    out[r0:r1, c0:c1] = mask[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
    return out


class GridGraph(object):
    """
    Sparse graph over the free cells of one floor. Moves go to the 8 neighbours; a diagonal move
    needs both orthogonal cells free. Edge weights are metres.
    """

    def __init__(self, grid: np.ndarray, resolution: float):
        self.grid = np.asarray(grid)
        self.resolution = float(resolution)
        self.shape = self.grid.shape
        self.free = self.grid == FREE
        self._tables: Dict[int, Tuple[np.ndarray, np.ndarray]] = dict()

        rows, cols = self.shape
        ids = np.arange(rows * cols).reshape(self.shape)
        src, dst, weight = [], [], []
        for dr, dc in _ORTHOGONAL + _DIAGONAL:
            ok = self.free & _shift(self.free, dr, dc)
            if dr and dc:
                ok &= _shift(self.free, dr, 0) & _shift(self.free, 0, dc)
            src.append(ids[ok])
            dst.append(ids[ok] + dr * cols + dc)
            step = self.resolution * (math.sqrt(2.0) if dr and dc else 1.0)
            weight.append(np.full(int(ok.sum()), step))
        self.graph = coo_matrix(
            (np.concatenate(weight), (np.concatenate(src), np.concatenate(dst))), shape=(rows * cols, rows * cols)
        ).tocsr()

    def _node(self, cell: Cell) -> int:
        return int(cell[0]) * self.shape[1] + int(cell[1])

    def _table(self, start: Cell) -> Tuple[np.ndarray, np.ndarray]:
        node = self._node(start)
        if node not in self._tables:
            if len(self._tables) > 256:
                self._tables.clear()
            dist, pred = dijkstra(self.graph, directed=True, indices=node, return_predecessors=True)
            self._tables[node] = (dist.reshape(self.shape), pred)
        return self._tables[node]

    def distances(self, start: Cell) -> np.ndarray:
        """Path length in metres from `start` to every cell (inf when unreachable)."""
        return self._table(start)[0]

    def path(self, start: Cell, goal: Cell) -> Optional[List[Cell]]:
        """Cells from `start` to `goal` inclusive, or None when unreachable."""
        dist, pred = self._table(start)
        if not np.isfinite(dist[goal]):
            return None
        cols = self.shape[1]
        node, start_node = self._node(goal), self._node(start)
        nodes = [node]
        while node != start_node:
            node = int(pred[node])
            nodes.append(node)
        return [divmod(n, cols) for n in reversed(nodes)]

    def nearest_in_mask(self, start: Cell, mask: np.ndarray) -> Tuple[Optional[Cell], float]:
        """Reachable cell of `mask` with the shortest path from `start`; ties go to the lowest flat index."""
        dist = np.where(mask, self.distances(start), np.inf)
        flat = int(np.argmin(dist))
        if not np.isfinite(dist.flat[flat]):
            return None, math.inf
        return divmod(flat, self.shape[1]), float(dist.flat[flat])


def path_length(cells: List[Cell], resolution: float) -> float:
    if len(cells) < 2:
        return 0.0
    steps = np.diff(np.asarray(cells, dtype=float), axis=0)
    return float(np.sum(np.linalg.norm(steps, axis=1)) * resolution)


def bresenham(start: Cell, end: Cell) -> List[Cell]:
    """Cells on the digital line from `start` to `end`, both inclusive."""
    r0, c0 = int(start[0]), int(start[1])
    r1, c1 = int(end[0]), int(end[1])
    dr, dc = abs(r1 - r0), -abs(c1 - c0)
    sr = 1 if r0 < r1 else -1
    sc = 1 if c0 < c1 else -1
    err = dr + dc
    cells = []
    while True:
        cells.append((r0, c0))
        if r0 == r1 and c0 == c1:
            break
        e2 = 2 * err
        if e2 >= dc:
            err += dc
            r0 += sr
        if e2 <= dr:
            err += dr
            c0 += sc
    return cells


def line_of_sight(grid: np.ndarray, start: Cell, end: Cell) -> bool:
    """True when no cell strictly between `start` and `end` is occupied or outside the grid."""
    rows, cols = grid.shape
    for r, c in bresenham(start, end)[1:-1]:
        if not (0 <= r < rows and 0 <= c < cols) or grid[r, c] == OCCUPIED:
            return False
    return True


def reachable_mask(grid: np.ndarray, start: Cell) -> np.ndarray:
    """Free cells 4-connected to `start` (equivalent to 8-connected moves without corner cutting)."""
    free = grid == FREE
    if not free[start]:
        return np.zeros_like(free)
    labels, _ = ndimage.label(free)
    return labels == labels[start]


def nearest_free_cell(grid: np.ndarray, cell: Cell, mask: Optional[np.ndarray] = None) -> Optional[Cell]:
    """Free cell (optionally restricted to `mask`) closest in Euclidean distance to `cell`."""
    candidates = grid == FREE
    if mask is not None:
        candidates &= mask
    rows, cols = np.nonzero(candidates)
    if rows.size == 0:
        return None
    d2 = (rows - cell[0]) ** 2 + (cols - cell[1]) ** 2
    best = int(np.argmin(d2))
    return int(rows[best]), int(cols[best])
