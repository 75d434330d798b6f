import math

import numpy as np
import pytest

from humanseek.gridmap import GridGraph
from humanseek.gridmap import bresenham
from humanseek.gridmap import line_of_sight
from humanseek.gridmap import nearest_free_cell
from humanseek.gridmap import path_length
from humanseek.gridmap import reachable_mask


def test_bresenham_endpoints_and_connectivity():
    cells = bresenham((0, 0), (3, 7))
    assert cells[0] == (0, 0) and cells[-1] == (3, 7)
    steps = np.abs(np.diff(np.asarray(cells), axis=0))
    assert steps.max() == 1
    assert len(cells) == 8


def test_line_of_sight_blocked_by_wall(two_rooms):
    grid = two_rooms.grid(0)
    assert line_of_sight(grid, (1, 2), (1, 7)) is False
    assert line_of_sight(grid, (2, 2), (2, 7)) is True
    assert line_of_sight(grid, (1, 1), (1, 3)) is True
    assert line_of_sight(grid, (2, 2), (2, 2)) is True


def test_shortest_path_goes_through_the_door(two_rooms):
    graph = GridGraph(two_rooms.grid(0), two_rooms.resolution)
    cells = graph.path((1, 2), (1, 6))
    assert cells is not None
    assert (2, 4) in cells
    assert path_length(cells, 1.0) == pytest.approx(graph.distances((1, 2))[1, 6])
    assert graph.distances((1, 2))[1, 6] > 4.0


def test_no_corner_cutting():
    grid = np.array([[0, 1], [1, 0]])
    graph = GridGraph(grid, 1.0)
    assert graph.path((0, 0), (1, 1)) is None
    assert math.isinf(graph.distances((0, 0))[1, 1])


def test_diagonal_moves_cost_sqrt_two():
    graph = GridGraph(np.zeros((3, 3), dtype=int), 0.5)
    assert graph.distances((0, 0))[2, 2] == pytest.approx(2 * 0.5 * math.sqrt(2))


def test_nearest_in_mask(two_rooms):
    graph = GridGraph(two_rooms.grid(0), two_rooms.resolution)
    mask = two_rooms.area_mask("right room")
    cell, distance = graph.nearest_in_mask((2, 2), mask)
    assert cell == (2, 5)
    assert distance == pytest.approx(3.0)


def test_reachable_mask_excludes_enclosed_cells():
    grid = np.array(
        [
            [0, 0, 1, 0],
            [0, 0, 1, 0],
            [1, 1, 1, 0],
        ]
    )
    mask = reachable_mask(grid, (0, 0))
    assert mask.sum() == 4
    assert not mask[0, 3]
    assert reachable_mask(grid, (0, 2)).sum() == 0


def test_nearest_free_cell():
    grid = np.ones((5, 5), dtype=int)
    grid[4, 4] = 0
    grid[0, 3] = 0
    assert nearest_free_cell(grid, (0, 0)) == (0, 3)
    mask = np.zeros_like(grid, dtype=bool)
    mask[4, 4] = True
    assert nearest_free_cell(grid, (0, 0), mask) == (4, 4)
    assert nearest_free_cell(np.ones((2, 2), dtype=int), (0, 0)) is None
