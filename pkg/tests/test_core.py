import math

import numpy as np
import pytest

from conftest import angle_close
from humanseek.core import FREE
from humanseek.core import OCCUPIED
from humanseek.core import UNKNOWN
from humanseek.core import ApproachState
from humanseek.core import Area
from humanseek.core import Pose2D
from humanseek.core import StateGrid
from humanseek.core import Trajectory
from humanseek.core import TrajectorySample
from humanseek.core import Waypoint
from humanseek.core import discretize
from humanseek.core import discretize_array
from humanseek.core import from_human_frame
from humanseek.core import load_map
from humanseek.core import map_from_dict
from humanseek.core import map_to_dict
from humanseek.core import polygon_is_simple
from humanseek.core import to_human_frame
from humanseek.core import wrap_angle
from humanseek.exceptions import MapFormatError


def test_wrap_angle_range():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    wrapped = wrap_angle(np.linspace(-10, 10, 101))
    assert np.all(wrapped > -math.pi) and np.all(wrapped <= math.pi)


def test_waypoint_floor_must_be_non_negative_integer():
    with pytest.raises(ValueError):
        Waypoint(0.0, 0.0, z=-1)
    with pytest.raises(ValueError):
        Waypoint(0.0, 0.0, z=0.5)


def test_human_frame_of_robot_in_front():
    human = Pose2D(2.0, 1.0, math.pi / 2)
    robot = Pose2D(2.0, 4.0, -math.pi / 2)
    relative = to_human_frame(robot, human)
    assert relative.x == pytest.approx(3.0)
    assert relative.y == pytest.approx(0.0, abs=1e-12)
    assert angle_close(relative.theta, math.pi)


@pytest.mark.parametrize("theta", [0.0, 0.7, -2.5, math.pi])
def test_human_frame_inverse(theta):
    human = Pose2D(-1.5, 2.0, theta)
    robot = Pose2D(3.0, -0.5, 1.2)
    back = from_human_frame(to_human_frame(robot, human), human)
    assert back.x == pytest.approx(robot.x)
    assert back.y == pytest.approx(robot.y)
    assert angle_close(back.theta, robot.theta)


def test_state_grid_dimensions(grid):
    assert grid.shape == (25, 13, 8, 2, 3)
    assert grid.size == 15600
    assert grid.states.shape == (15600, 5)
    assert grid.inducing_mask.sum() == 7800
    assert grid.x_bins[0] == -6.0 and grid.x_bins[-1] == 6.0


def test_state_grid_rejects_unsorted_bins():
    with pytest.raises(ValueError):
        StateGrid(v_bins=(0.4, 0.15))


def test_state_grid_dict_preserves_grid(grid):
    assert StateGrid.from_dict(grid.to_dict()) == grid


def test_discretize_nearest_bin(grid):
    index = discretize(ApproachState(0.24, 0.26, 0.1, 1, 0.5), grid)
    assert index == (12, 7, 4, 1, 1)


def test_discretize_ties_go_to_lower_index(grid):
    index = discretize(ApproachState(0.25, 0.0, 0.0, 0, 0.15), grid)
    assert index[0] == 12


def test_discretize_clamps_and_wraps(grid):
    indices = discretize_array(np.array([[100.0, -100.0, math.pi - 0.01, 1, 5.0]]), grid)
    assert tuple(indices[0]) == (24, 0, 0, 1, 2)


def test_discretize_is_idempotent(grid):
    assert np.array_equal(discretize_array(grid.states, grid), np.indices(grid.shape).reshape(5, -1).T)
    rng = np.random.default_rng(2)
    n = 500
    states = np.column_stack(
        [
            rng.uniform(-8.0, 8.0, n),
            rng.uniform(-5.0, 5.0, n),
            rng.uniform(-4.0, 4.0, n),
            rng.integers(0, 2, n),
            rng.uniform(0.0, 1.0, n),
        ]
    )
    indices = discretize_array(states, grid)
    snapped = grid.states[np.ravel_multi_index(tuple(indices.T), grid.shape)]
    assert np.array_equal(discretize_array(snapped, grid), indices)


def test_polygon_is_simple():
    assert polygon_is_simple(((0, 0), (1, 0), (1, 1), (0, 1)))
    assert not polygon_is_simple(((0, 0), (1, 1), (1, 0), (0, 1)))


def test_self_intersecting_area_is_rejected():
    with pytest.raises(MapFormatError):
        Area("bowtie", ((0, 0), (1, 1), (1, 0), (0, 1)))


def test_ascii_rows_are_top_first():
    annotated_map = map_from_dict(dict(resolution=1.0, grids=[["#.?", "..."]]))
    grid = annotated_map.grid(0)
    assert grid[0].tolist() == [FREE, FREE, FREE]
    assert grid[1].tolist() == [OCCUPIED, FREE, UNKNOWN]


def test_map_format_errors():
    with pytest.raises(MapFormatError):
        map_from_dict(dict(resolution=1.0, grids=[["#x"]]))
    with pytest.raises(MapFormatError):
        map_from_dict(dict(resolution=1.0, floors=2, grids=[["##"]]))
    with pytest.raises(MapFormatError):
        map_from_dict(dict(grids=[["##"]]))
    with pytest.raises(MapFormatError):
        map_from_dict(dict(resolution=1.0, grids=[["..", "..."]]))


def test_map_dict_preserves_grids(two_rooms):
    again = map_from_dict(map_to_dict(two_rooms))
    assert np.array_equal(again.grid(0), two_rooms.grid(0))
    assert again.labels == two_rooms.labels


def test_area_queries(two_rooms):
    assert two_rooms.labels == ["left room", "right room"]
    assert two_rooms.label_at(2.5, 2.5) == "left room"
    assert two_rooms.label_at(6.5, 2.5) == "right room"
    assert two_rooms.label_at(4.5, 3.5) is None
    mask = two_rooms.area_mask("left room")
    assert mask.sum() == 12
    assert not mask.flags.writeable
    with pytest.raises(KeyError):
        two_rooms.area_floor("garden")


def test_cell_conversions(open_map):
    row, col = open_map.world_to_cell(0.1, -0.1)
    assert (row, col) == (9, 16)
    assert open_map.cell_center(row, col) == pytest.approx((0.25, -0.25))
    assert open_map.is_free(0.0, 0.0)
    assert not open_map.is_free(-7.9, 0.0)
    assert not open_map.is_free(100.0, 0.0)


def test_packaged_lab_map(data):
    lab = load_map(data("maps", "lab.json"))
    assert lab.floors == 2
    assert lab.shape == (24, 40)
    assert "kitchen" in lab.labels and "workshop" in lab.labels
    assert lab.area_floor("workshop") == 1
    assert lab.label_at(15.0, 2.0) == "kitchen"
    assert lab.is_free(15.0, 2.0)


def test_trajectory_needs_increasing_timestamps():
    samples = [TrajectorySample(t=0.0, pose=Pose2D(0, 0), v=0.4), TrajectorySample(t=0.0, pose=Pose2D(1, 0), v=0.4)]
    with pytest.raises(ValueError):
        Trajectory(samples=tuple(samples))
    with pytest.raises(ValueError):
        Trajectory(samples=())


def test_trajectory_length_and_records():
    records = [dict(t=0.0, x=0.0, y=0.0, v=0.4), dict(t=1.0, x=3.0, y=4.0, v=0.4), dict(t=2.0, x=3.0, y=5.0, v=0.4)]
    trajectory = Trajectory.from_records(records)
    assert len(trajectory) == 3
    assert trajectory.length == pytest.approx(6.0)
    assert trajectory.to_records()[1]["x"] == 3.0
