import math

import numpy as np
import pytest
from conftest import frontal_field

from humanseek.core import AnnotatedMap
from humanseek.core import Pose2D
from humanseek.core import StateGrid
from humanseek.core import map_from_dict
from humanseek.exceptions import GridMismatchError
from humanseek.exceptions import PlanningError
from humanseek.planner import PlannerParams
from humanseek.planner import PlanRequest
from humanseek.planner import assign_velocities
from humanseek.planner import blend
from humanseek.planner import connection_radius
from humanseek.planner import edge_cost
from humanseek.planner import path_cost
from humanseek.planner import plan
from humanseek.planner import plan_path
from humanseek.planner import segment_free
from humanseek.planner import straight_path
from humanseek.reward import RewardField

HUMAN = Pose2D(0.0, 0.0, 0.0)
START = Pose2D(6.0, 0.0, math.pi)


@pytest.fixture(scope="module")
def walled_map(open_map) -> AnnotatedMap:
    """open_map with a 3 m wall across the line between START and HUMAN."""
    grid = open_map.grid(0).copy()
    grid[7:13, 22] = 1
    return AnnotatedMap(grids=(grid,), resolution=open_map.resolution, areas=open_map.areas, origin=open_map.origin)


def _assert_valid(path, annotated_map, params):
    assert path[0] == pytest.approx((START.x, START.y, START.theta))
    assert math.hypot(path[-1][0], path[-1][1]) <= params.goal_radius
    for a, b in zip(path[:-1], path[1:]):
        assert segment_free(annotated_map, a, b)


def test_blend_rescales(grid, frontal, lateral):
    mixed = blend(frontal, lateral, 0.2)
    assert mixed.values.min() == pytest.approx(0.0)
    assert mixed.values.max() == pytest.approx(1.0)
    assert mixed.meta["w_r"] == 0.2
    only_lateral = blend(frontal, lateral, 0.0)
    assert np.allclose(only_lateral.values, lateral.values / lateral.values.max())


def test_constant_blend_is_zero(grid):
    ones = RewardField(values=np.ones(grid.shape), grid=grid)
    assert not blend(ones, ones, 0.5).values.any()


def test_blend_needs_matching_grids(grid, frontal):
    other = frontal_field(StateGrid(v_bins=(0.2, 0.5)))
    with pytest.raises(GridMismatchError):
        blend(frontal, other)


def test_blend_stays_in_unit_range(grid):
    rng = np.random.default_rng(6)
    for _ in range(10):
        R_I = RewardField(values=rng.normal(0.0, rng.uniform(0.1, 5.0), grid.shape), grid=grid)
        R_L = RewardField(values=rng.uniform(-2.0, 3.0, grid.shape), grid=grid)
        w_r = float(rng.uniform(0.0, 1.0))
        values = blend(R_I, R_L, w_r).values
        assert values.min() == pytest.approx(0.0) and values.max() == pytest.approx(1.0)
        assert (values >= 0.0).all() and (values <= 1.0).all()
        raw = w_r * R_I.values + (1.0 - w_r) * R_L.values
        assert np.argmax(values) == np.argmax(raw)


def test_edge_cost():
    a, b = (0.0, 0.0, 0.0), (3.0, 4.0, math.pi / 2)
    assert edge_cost(a, b, 0.5) == pytest.approx(1.5 * 0.5 * (5.0 + 0.5 * math.pi / 2))
    assert edge_cost(a, b, 1.0) == 0.0
    params = PlannerParams(w_o=0.0, zeta=1.0)
    assert edge_cost(a, b, 0.0, params=params) == pytest.approx(5.0)


def test_edge_cost_reads_the_field(grid):
    quarter = RewardField(values=np.full(grid.shape, 0.25), grid=grid)
    a, b = (3.0, 0.0, math.pi), (2.0, 0.0, math.pi)
    assert edge_cost(a, b, quarter) == pytest.approx(edge_cost(a, b, 0.25))


def test_params_validation():
    with pytest.raises(ValueError):
        PlannerParams(w_r=1.5)
    with pytest.raises(ValueError):
        PlannerParams(samples=5)
    with pytest.raises(ValueError):
        PlannerParams(goal_radius=0.0)


def test_segment_free(two_rooms):
    assert not segment_free(two_rooms, (1.5, 1.5), (6.5, 1.5))
    assert segment_free(two_rooms, (1.5, 2.5), (7.5, 2.5))
    assert not segment_free(two_rooms, (1.5, 2.5), (12.0, 2.5))


def test_connection_radius():
    assert connection_radius(100, 50.0, PlannerParams(connection_radius=3.0)) == 3.0
    assert connection_radius(10**6, 1.0) == 0.5
    assert connection_radius(100, 400.0) > connection_radius(1000, 400.0)


def test_straight_path():
    path = straight_path(START, HUMAN, 0.6)
    assert path == [pytest.approx((6.0, 0.0, math.pi)), pytest.approx((0.6, 0.0, math.pi))]
    assert straight_path(Pose2D(0.3, 0.0, 0.0), HUMAN, 0.6) == [(0.3, 0.0, 0.0)]


def test_frontal_reward_keeps_the_straight_approach(open_map, frontal):
    params = PlannerParams(samples=300)
    path, cost = plan_path(PlanRequest(START, HUMAN, 1, open_map, frontal), params)
    _assert_valid(path, open_map, params)
    assert len(path) == 2
    assert cost == pytest.approx(0.0)


def test_planned_cost_never_exceeds_straight(open_map, lateral):
    params = PlannerParams(samples=400)
    request = PlanRequest(START, HUMAN, 1, open_map, lateral)
    path, cost = plan_path(request, params)
    _assert_valid(path, open_map, params)
    assert cost == pytest.approx(path_cost(path, lateral, 1, HUMAN, params))
    assert cost <= path_cost(straight_path(START, HUMAN, params.goal_radius * 0.999), lateral, 1, HUMAN, params) + 1e-9


def _open_instance(rng):
    human = Pose2D(rng.uniform(-6.0, 6.0), rng.uniform(-3.5, 3.5), rng.uniform(-math.pi, math.pi))
    while True:
        x, y = rng.uniform(-7.0, 7.0), rng.uniform(-4.0, 4.0)
        if 1.5 <= math.hypot(x - human.x, y - human.y) <= 8.0:
            return Pose2D(x, y, math.atan2(human.y - y, human.x - x)), human


def test_open_space_plans_match_the_straight_line(open_map, grid):
    uniform = RewardField(values=np.full(grid.shape, 0.5), grid=grid)
    params = PlannerParams(samples=100)
    rng = np.random.default_rng(21)
    for _ in range(50):
        start, human = _open_instance(rng)
        path, cost = plan_path(PlanRequest(start, human, int(rng.integers(2)), open_map, uniform), params, rng)
        straight = path_cost(straight_path(start, human, params.goal_radius * 0.999), uniform, 1, human, params)
        assert abs(cost - straight) <= 0.1 * straight
        assert path[0] == pytest.approx((start.x, start.y, start.theta))
        assert math.hypot(path[-1][0] - human.x, path[-1][1] - human.y) <= params.goal_radius
        for a, b in zip(path[:-1], path[1:]):
            assert segment_free(open_map, a, b)


def test_planning_is_reproducible(open_map, lateral):
    params = PlannerParams(samples=200)
    request = PlanRequest(START, HUMAN, 1, open_map, lateral)
    first = plan_path(request, params, np.random.default_rng(5))
    second = plan_path(request, params, np.random.default_rng(5))
    assert first == second


def test_planner_goes_around_walls(walled_map, grid):
    params = PlannerParams(samples=500, window_padding=3.0)
    request = PlanRequest(START, HUMAN, 1, walled_map, RewardField.zeros(grid))
    path, cost = plan_path(request, params)
    _assert_valid(path, walled_map, params)
    assert len(path) > 2
    assert cost > 1.5 * (6.0 - params.goal_radius)


def test_start_in_collision(open_map, frontal):
    with pytest.raises(PlanningError):
        plan_path(PlanRequest(Pose2D(-7.8, 0.0, 0.0), HUMAN, 1, open_map, frontal), PlannerParams(samples=50))


def test_unreachable_person(grid):
    sealed = map_from_dict(dict(resolution=1.0, grids=[["#######", "#..#..#", "#..#..#", "#######"]], areas=[]))
    request = PlanRequest(Pose2D(1.5, 1.5, 0.0), Pose2D(5.0, 2.0, 0.0), 1, sealed, RewardField.zeros(grid))
    with pytest.raises(PlanningError):
        plan_path(request, PlannerParams(samples=50))


def test_assign_velocities(grid):
    values = np.zeros(grid.shape)
    values[..., 1] = 1.0
    path = [(2.0, 0.0, math.pi), (1.0, 0.0, math.pi)]
    trajectory = assign_velocities(path, RewardField(values=values, grid=grid), 1, HUMAN)
    assert [s.v for s in trajectory.samples] == [0.4, 0.4]
    assert trajectory.samples[-1].t == pytest.approx(2.5)

    slowest = assign_velocities(path, RewardField.zeros(grid), 1, HUMAN)
    assert [s.v for s in slowest.samples] == [0.15, 0.15]
    with pytest.raises(ValueError):
        assign_velocities([], RewardField.zeros(grid), 1)


def test_plan_returns_world_trajectory(open_map, frontal):
    trajectory = plan(PlanRequest(START, HUMAN, 1, open_map, frontal), PlannerParams(samples=100))
    assert trajectory.frame == "world"
    assert trajectory.samples[0].pose.x == pytest.approx(6.0)
    assert math.hypot(*trajectory.xy[-1]) <= 0.6
