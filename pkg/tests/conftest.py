import math
from pathlib import Path

import numpy as np
import pytest

from humanseek.config import data_path
from humanseek.core import AnnotatedMap
from humanseek.core import Area
from humanseek.core import StateGrid
from humanseek.core import map_from_dict
from humanseek.reward import RewardField

TESTS_DIR = Path(__file__).parent


def fixture_path(*parts) -> str:
    """Files that only the tests use (tests/data)."""
    return str(TESTS_DIR.joinpath("data", *parts))


@pytest.fixture(scope="module")
def grid() -> StateGrid:
    return StateGrid()


@pytest.fixture(scope="module")
def two_rooms() -> AnnotatedMap:
    """
    10 x 6 cells of 1 m: two rooms joined by a door in the middle of the dividing wall.

        ##########
        #...#....#
        #...#....#
        #........#   <- row 2
        #...#....#
        ##########
    """
    rows = [
        "##########",
        "#...#....#",
        "#...#....#",
        "#........#",
        "#...#....#",
        "##########",
    ]
    return map_from_dict(
        dict(
            resolution=1.0,
            grids=[rows],
            areas=[
                dict(label="left room", polygon=[[1, 1], [4, 1], [4, 5], [1, 5]]),
                dict(label="right room", polygon=[[5, 1], [9, 1], [9, 5], [5, 5]]),
            ],
        )
    )


@pytest.fixture(scope="module")
def open_map() -> AnnotatedMap:
    """16 m x 10 m of free space around the origin, one cell of wall at the border."""
    grid = np.zeros((20, 32), dtype=int)
    grid[0, :] = grid[-1, :] = grid[:, 0] = grid[:, -1] = 1
    return AnnotatedMap(
        grids=(grid,),
        resolution=0.5,
        areas=(Area("hall", ((-7.5, -4.5), (7.5, -4.5), (7.5, 4.5), (-7.5, 4.5))),),
        origin=(-8.0, -5.0),
    )


def frontal_field(grid: StateGrid, width: float = 0.6) -> RewardField:
    """Reward concentrated in front of the person (x > 0, small |y|), for both gaze values."""
    states = grid.states
    x, y = states[:, 0], states[:, 1]
    values = np.where(x > 0, np.exp(-0.5 * (y / width) ** 2), 0.0)
    return RewardField(values=values.reshape(grid.shape), grid=grid, meta=dict(source="test"))


def lateral_field(grid: StateGrid) -> RewardField:
    """Reward high on the person's left side (y > 0) and zero in front."""
    states = grid.states
    x, y = states[:, 0], states[:, 1]
    values = np.clip(y / 3.0, 0.0, 1.0) * np.exp(-0.5 * (x / 1.5) ** 2)
    return RewardField(values=values.reshape(grid.shape), grid=grid, meta=dict(source="test"))


@pytest.fixture(scope="module")
def frontal(grid) -> RewardField:
    return frontal_field(grid)


@pytest.fixture(scope="module")
def lateral(grid) -> RewardField:
    return lateral_field(grid)


@pytest.fixture(scope="module")
def data():
    return data_path


def angle_close(a: float, b: float, tol: float = 1e-9) -> bool:
    return abs(math.remainder(a - b, 2.0 * math.pi)) <= tol
