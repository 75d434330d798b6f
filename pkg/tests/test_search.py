import math

import numpy as np
import pytest

from humanseek.core import OCCUPIED
from humanseek.core import UNKNOWN
from humanseek.core import Waypoint
from humanseek.core import map_from_dict
from humanseek.exceptions import ExplorationExhausted
from humanseek.perception import Detection
from humanseek.perception import DetectionKind
from humanseek.perception import SensorModel
from humanseek.perception import visible_cells
from humanseek.search import EventKind
from humanseek.search import Method
from humanseek.search import Observation
from humanseek.search import SearchAgent
from humanseek.search import SearchConfig
from humanseek.search import VisitHistory
from humanseek.search import frontier_waypoints
from humanseek.search import knowledge_grid
from humanseek.search import select_next_label
from humanseek.search import should_visit
from humanseek.search import standoff_waypoint

def _seen(annotated_map):
    return np.ones(annotated_map.shape, dtype=bool)

def _general(pid, x, y):
    return Detection(bbox=(0, 0, 0, 0), kind=DetectionKind.GeneralPerson, person_id=pid, position=(x, y))

def _text(pid, x, y):
    return Detection(bbox=(0, 0, 0, 0), kind=DetectionKind.TextMatch, person_id=pid, position=(x, y))

def test_method_switches():
    assert (Method.Proposed.use_prior, Method.Proposed.indirect) == (True, True)
    assert (Method.KnowledgePrior.use_prior, Method.KnowledgePrior.indirect) == (True, False)
    assert (Method.CowIndirect.use_prior, Method.CowIndirect.indirect) == (False, True)
    assert (Method.Cow.use_prior, Method.Cow.indirect) == (False, False)
    assert Method.parse("Knowledge-Prior") == Method.KnowledgePrior
    assert Method.parse("cowindirect") == Method.CowIndirect
    with pytest.raises(ValueError):
        Method.parse("random")

def test_config_presets_and_validation():
    assert SearchConfig.real_world().max_path == 30.0
    assert SearchConfig.simulation().max_path == 15.0
    assert SearchConfig.simulation().max_false_detections == 3
    assert SearchConfig.simulation(max_path=20.0).max_path == 20.0
    with pytest.raises(ValueError):
        SearchConfig(t_g=0.0)
    with pytest.raises(ValueError):
        SearchConfig(w_e=-1.0)

def test_should_visit_is_strict():
    history = VisitHistory([Waypoint(0.0, 0.0, 0)])
    assert not should_visit(Waypoint(2.0, 0.0, 0), history, 2.0)
    assert should_visit(Waypoint(2.01, 0.0, 0), history, 2.0)
    assert should_visit(Waypoint(0.0, 0.0, 1), history, 2.0)
    assert should_visit(Waypoint(0.0, 0.0, 0), VisitHistory(), 2.0)

def test_select_next_label():
    costs = dict(b=1.0, a=1.0, c=0.5, d=math.inf)
    assert select_next_label(costs, {"c"}) == "a"
    assert select_next_label(costs, set()) == "c"
    with pytest.raises(ExplorationExhausted):
        select_next_label(costs, {"a", "b", "c"})

def test_knowledge_grid():
    grid = np.zeros((2, 3), dtype=int)
    seen = np.array([[True, False, True], [True, True, True]])
    area = np.array([[True, True, True], [False, True, True]])
    known = knowledge_grid(grid, seen, area)
    assert known.tolist() == [[0, UNKNOWN, 0], [OCCUPIED, 0, 0]]

def test_frontier_between_known_and_unknown():
    grid = np.full((5, 6), UNKNOWN)
    grid[:, :3] = 0
    robot = Waypoint(0.5, 2.5, 0, 0.0)
    waypoints = frontier_waypoints(grid, robot)
    assert len(waypoints) == 1
    assert (waypoints[0].x, waypoints[0].y) == pytest.approx((2.5, 2.5))
    assert waypoints[0].theta == pytest.approx(0.0)

def test_small_frontier_clusters_are_dropped():
    grid = np.zeros((5, 5), dtype=int)
    grid[:, 4] = OCCUPIED
    grid[0, 4] = UNKNOWN
    assert frontier_waypoints(grid, Waypoint(2.5, 2.5, 0), min_cluster=3) == []
    assert len(frontier_waypoints(grid, Waypoint(2.5, 2.5, 0), min_cluster=1)) == 1

def test_frontier_centroid_snaps_into_cluster():
    grid = np.zeros((5, 5), dtype=int)
    grid[2, 2] = UNKNOWN
    waypoints = frontier_waypoints(grid, Waypoint(0.5, 0.5, 0), min_cluster=3)
    assert len(waypoints) == 1
    assert (waypoints[0].x, waypoints[0].y) == pytest.approx((2.5, 1.5))

def test_frontiers_sorted_by_distance():
    grid = np.zeros((3, 12), dtype=int)
    grid[:, 5:7] = UNKNOWN
    waypoints = frontier_waypoints(grid, Waypoint(11.5, 1.5, 0), min_cluster=3)
    assert [w.x for w in waypoints] == pytest.approx([7.5, 4.5])

def test_standoff_waypoint_on_ray():
    waypoint = standoff_waypoint((0.0, 0.0), Waypoint(10.0, 0.0, 0), 5.0)
    assert (waypoint.x, waypoint.y) == pytest.approx((5.0, 0.0))
    assert abs(waypoint.theta) == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        standoff_waypoint((1.0, 1.0), Waypoint(1.0, 1.0, 0), 5.0)

def test_standoff_waypoint_avoids_walls(two_rooms):
    waypoint = standoff_waypoint((6.5, 3.5), Waypoint(0.5, 3.5, 0), 2.0, two_rooms)
    assert two_rooms.is_free(waypoint.x, waypoint.y)
    assert (waypoint.x, waypoint.y) == pytest.approx((5.5, 3.5))

def test_agent_explores_cheapest_label_first(two_rooms):
    start = Waypoint(2.5, 2.5, 0, 0.0)
    agent = SearchAgent(two_rooms, SearchConfig(), use_prior=False, indirect=True, start=start)
    event = agent.step(Observation(pose=start, visible=_seen(two_rooms)))
    assert event.kind == EventKind.MoveTo
    assert event.label == "right room"
    assert (event.waypoint.x, event.waypoint.y) == pytest.approx((5.5, 2.5))
    assert event.waypoint.theta == pytest.approx(math.atan2(0.5, 1.5))
    assert agent.visited_labels == {"left room", "right room"}

    event = agent.step(Observation(pose=event.waypoint, path_length=3.0, visible=_seen(two_rooms)))
    assert event.kind == EventKind.DeclareFailure
    assert event.purpose == "exploration exhausted"
    with pytest.raises(RuntimeError):
        agent.step(Observation(pose=start))

def test_prior_reorders_labels(two_rooms):
    start = Waypoint(6.5, 2.5, 0, 0.0)
    priors = {"left room": 1.0, "right room": 0.0}
    agent = SearchAgent(two_rooms, SearchConfig(), use_prior=True, indirect=True, priors=priors, start=start)
    event = agent.step(Observation(pose=start, visible=_seen(two_rooms)))
    assert event.label == "left room"

def test_indirect_search_verifies_at_standoff(two_rooms):
    start = Waypoint(1.5, 2.5, 0, 0.0)
    config = SearchConfig(standoff=2.0)
    agent = SearchAgent(two_rooms, config, use_prior=False, indirect=True, start=start)
    assert not agent.wants_text_query

    event = agent.step(Observation(pose=start, detections=(_general(7, 7.5, 2.5),)))
    assert event.kind == EventKind.MoveTo and event.purpose == "standoff" and event.person_id == 7
    assert math.hypot(event.waypoint.x - 7.5, event.waypoint.y - 2.5) == pytest.approx(2.0)
    assert agent.wants_text_query

    pose = event.waypoint
    event = agent.step(Observation(pose=pose, path_length=4.0, detections=(_general(7, 7.5, 2.5), _text(7, 7.5, 2.5))))
    assert event.kind == EventKind.AskFeedback and event.person_id == 7

    event = agent.step(Observation(pose=pose, path_length=4.0, feedback=True))
    assert event.kind == EventKind.DeclareSuccess and event.person_id == 7
    assert agent.false_detections == 0

def test_indirect_search_skips_non_matching_person(two_rooms):
    start = Waypoint(1.5, 2.5, 0, 0.0)
    agent = SearchAgent(two_rooms, SearchConfig(standoff=2.0), use_prior=False, indirect=True, start=start)
    event = agent.step(Observation(pose=start, detections=(_general(7, 7.5, 2.5),)))
    event = agent.step(Observation(pose=event.waypoint, detections=(_general(7, 7.5, 2.5),), visible=_seen(two_rooms)))
    assert event.kind != EventKind.AskFeedback
    assert 7 in agent.examined
    assert agent.false_detections == 0

def test_direct_search_counts_false_detections(two_rooms):
    start = Waypoint(5.5, 2.5, 0, 0.0)
    config = SearchConfig(standoff=5.0, max_false_detections=1)
    agent = SearchAgent(two_rooms, config, use_prior=False, indirect=False, start=start)
    assert agent.wants_text_query

    event = agent.step(Observation(pose=start, detections=(_text(3, 7.5, 2.5),)))
    assert event.kind == EventKind.AskFeedback and event.person_id == 3
    event = agent.step(Observation(pose=start, feedback=False))
    assert agent.false_detections == 1
    assert event.kind == EventKind.DeclareFailure
    assert event.purpose == "false detection budget"

def test_direct_search_approaches_far_match(two_rooms):
    start = Waypoint(1.5, 2.5, 0, 0.0)
    agent = SearchAgent(two_rooms, SearchConfig(standoff=2.0), use_prior=False, indirect=False, start=start)
    event = agent.step(Observation(pose=start, detections=(_text(3, 8.5, 2.5),)))
    assert event.kind == EventKind.MoveTo and event.purpose == "approach"
    assert (event.waypoint.x, event.waypoint.y) == pytest.approx((8.5, 2.5))
    assert event.waypoint != standoff_waypoint((8.5, 2.5), start, 2.0, two_rooms)
    event = agent.step(Observation(pose=event.waypoint, path_length=7.0))
    assert event.kind == EventKind.AskFeedback and event.person_id == 3

def test_direct_search_asks_when_match_spot_was_visited(two_rooms):
    start = Waypoint(1.5, 2.5, 0, 0.0)
    agent = SearchAgent(two_rooms, SearchConfig(standoff=2.0), use_prior=False, indirect=False, start=start)
    agent.history.append(Waypoint(8.0, 2.5, 0, 0.0))
    event = agent.step(Observation(pose=start, detections=(_text(3, 8.5, 2.5),)))
    assert event.kind == EventKind.AskFeedback and event.person_id == 3
    assert len(agent.history) == 2

def test_path_budget(two_rooms):
    start = Waypoint(1.5, 2.5, 0, 0.0)
    agent = SearchAgent(two_rooms, SearchConfig(max_path=10.0), use_prior=False, indirect=True, start=start)
    event = agent.step(Observation(pose=start, path_length=10.5))
    assert event.kind == EventKind.DeclareFailure and event.purpose == "path budget"

def test_emitted_waypoints_respect_visit_filter(two_rooms):
    start = Waypoint(1.5, 1.5, 0, 0.0)
    config = SearchConfig(t_g=1.0)
    agent = SearchAgent(two_rooms, config, use_prior=False, indirect=True, start=start)
    sensor = SensorModel(range=2.0)
    observation = Observation(pose=start, visible=visible_cells(two_rooms, start, sensor))
    for _ in range(200):
        event = agent.step(observation)
        if event.kind != EventKind.MoveTo:
            break
        earlier = agent.history.waypoints[:-1]
        if event.purpose == "frontier":
            assert all(event.waypoint.distance_to(w) > config.t_g for w in earlier if w.z == event.waypoint.z)
        observation = Observation(pose=event.waypoint, visible=visible_cells(two_rooms, event.waypoint, sensor))
    assert event.kind == EventKind.DeclareFailure


def test_visit_filter_applies_across_floors():
    rows = ["######", "#....#", "#....#", "#....#", "#....#", "######"]
    two_floors = map_from_dict(
        dict(
            resolution=1.0,
            grids=[rows, rows],
            areas=[
                dict(label="hall", polygon=[[1, 1], [5, 1], [5, 5], [1, 5]]),
                dict(label="office", floor=1, polygon=[[1, 1], [3, 1], [3, 5], [1, 5]]),
                dict(label="lounge", floor=1, polygon=[[3, 1], [5, 1], [5, 5], [3, 5]]),
            ],
        )
    )
    start = Waypoint(1.5, 2.5, 0, 0.0)
    agent = SearchAgent(two_floors, SearchConfig(t_g=1.0), use_prior=False, indirect=True, start=start)
    agent.history.append(Waypoint(1.5, 2.5, 1, 0.0))

    event = agent.step(Observation(pose=start))
    assert event.kind == EventKind.MoveTo and event.purpose == "label"
    assert event.label == "lounge" and event.waypoint.z == 1
    assert {"hall", "office"} <= agent.visited_labels
    earlier = agent.history.waypoints[:-1]
    assert all(event.waypoint.distance_to(w) > 1.0 for w in earlier if w.z == 1)
