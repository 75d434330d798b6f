import math

import numpy as np
import pytest

from humanseek.core import Pose2D
from humanseek.core import Waypoint
from humanseek.perception import ActivationMap
from humanseek.perception import Detection
from humanseek.perception import DetectionKind
from humanseek.perception import Person
from humanseek.perception import SensorModel
from humanseek.perception import bbox_from_activation
from humanseek.perception import build_vqa_question
from humanseek.perception import gaze_flag
from humanseek.perception import is_visible
from humanseek.perception import load_activation_csv
from humanseek.perception import observe
from humanseek.perception import parse_vqa_answer
from humanseek.perception import visible_cells

RED = "wearing a red shirt"
BLUE = "wearing a blue jacket"


def _person(pid, x, y, appearance=RED, floor=0):
    return Person(id=pid, pose=Pose2D(x, y, 0.0), appearance=appearance, floor=floor)


def test_gaze_flag_threshold():
    def towards(degrees):
        rad = math.radians(degrees)
        return gaze_flag(0.0, (0.0, 0.0), (5.0 * math.cos(rad), 5.0 * math.sin(rad)))

    assert towards(0.0) == 1
    assert towards(39.0) == 1
    assert towards(40.0) == 0
    assert towards(-39.0) == 1
    assert towards(90.0) == 0
    assert towards(180.0) == 0


def test_bbox_from_activation_csv(data):
    detection = bbox_from_activation(load_activation_csv(data("activations", "person_center.csv")))
    assert detection.bbox == (6, 4, 11, 9)
    assert detection.kind == DetectionKind.TextMatch
    assert detection.score == pytest.approx(0.68)
    assert bbox_from_activation(load_activation_csv(data("activations", "empty.csv"))) is None


def test_activation_threshold_is_strict():
    values = np.full((3, 3), 0.5)
    assert bbox_from_activation(ActivationMap(values)) is None
    values[1, 2] = 0.51
    assert bbox_from_activation(ActivationMap(values)).bbox == (2, 1, 2, 1)


def test_bbox_matches_a_cell_scan():
    rng = np.random.default_rng(8)
    for _ in range(100):
        values = rng.random((16, 16)) * rng.uniform(0.3, 1.5)
        threshold = float(rng.uniform(0.2, 0.9))
        hits = [(x, y) for y in range(16) for x in range(16) if values[y, x] > threshold]
        detection = bbox_from_activation(ActivationMap(values, threshold))
        if not hits:
            assert detection is None
            continue
        xs, ys = [x for x, _ in hits], [y for _, y in hits]
        assert detection.bbox == (min(xs), min(ys), max(xs), max(ys))
        assert detection.score == pytest.approx(min(1.0, max(values[y, x] for x, y in hits)))


def test_detection_validation():
    with pytest.raises(ValueError):
        Detection(bbox=(3, 0, 1, 2), kind=DetectionKind.GeneralPerson)
    with pytest.raises(ValueError):
        Detection(bbox=(0, 0, 1, 1), kind=DetectionKind.GeneralPerson, score=1.5)
    with pytest.raises(ValueError):
        SensorModel(p_fp=1.2)


def test_visibility_fov_range_and_floor(open_map):
    sensor = SensorModel()
    robot = Waypoint(-3.0, 0.0, 0, 0.0)
    assert is_visible(open_map, robot, _person(1, 2.0, 0.0), sensor)
    assert not is_visible(open_map, Waypoint(-3.0, 0.0, 0, math.pi), _person(1, 2.0, 0.0), sensor)
    assert not is_visible(open_map, Waypoint(-3.0, 0.0, 0, 0.0), _person(1, 6.0, 0.0), sensor)
    assert not is_visible(open_map, robot, _person(1, 2.0, 0.0, floor=1), sensor)


def test_walls_occlude(two_rooms):
    robot = Waypoint(2.5, 1.5, 0, 0.0)
    assert not is_visible(two_rooms, robot, _person(1, 6.5, 1.5), SensorModel())
    seen = visible_cells(two_rooms, robot, SensorModel())
    assert seen[1, 3]
    assert seen[1, 4]
    assert not seen[1, 6]


def test_visible_cells_respect_fov(open_map):
    seen = visible_cells(open_map, Waypoint(0.0, 0.0, 0, 0.0), SensorModel())
    ahead = open_map.world_to_cell(3.0, 0.2)
    behind = open_map.world_to_cell(-3.0, 0.2)
    far = open_map.world_to_cell(7.25, 4.25)
    assert seen[ahead]
    assert not seen[behind]
    assert not seen[far]


def test_observe_noise_free(open_map):
    persons = [_person(1, 2.0, 0.0, RED), _person(2, 3.0, 1.0, BLUE), _person(3, -3.0, 0.0, RED)]
    robot = Waypoint(0.0, 0.0, 0, 0.0)
    rng = np.random.default_rng(0)
    detections = observe(persons, open_map, robot, None, SensorModel(), rng)
    assert [d.person_id for d in detections] == [1, 2]
    assert all(d.kind == DetectionKind.GeneralPerson for d in detections)

    detections = observe(persons, open_map, robot, RED, SensorModel(), rng)
    matches = [d.person_id for d in detections if d.kind == DetectionKind.TextMatch]
    assert matches == [1]


def test_observe_error_rates(open_map):
    persons = [_person(1, 2.0, 0.0, RED), _person(2, 3.0, 1.0, BLUE)]
    robot = Waypoint(0.0, 0.0, 0, 0.0)
    rng = np.random.default_rng(0)

    blind = observe(persons, open_map, robot, RED, SensorModel(p_fn=1.0), rng)
    assert not [d for d in blind if d.kind == DetectionKind.TextMatch]

    eager = observe(persons, open_map, robot, RED, SensorModel(p_fp=1.0), rng)
    assert [d.person_id for d in eager if d.kind == DetectionKind.TextMatch] == [1, 2]


def test_observe_is_reproducible(open_map):
    persons = [_person(i, 1.0 + i, 0.2 * i, RED if i % 2 else BLUE) for i in range(1, 6)]
    robot = Waypoint(0.0, 0.0, 0, 0.0)
    sensor = SensorModel(p_fp=0.3, p_fn=0.3)
    first = observe(persons, open_map, robot, RED, sensor, np.random.default_rng(42))
    second = observe(persons, open_map, robot, RED, sensor, np.random.default_rng(42))
    assert first == second


def test_vqa_interface():
    assert build_vqa_question(RED) == "Is a person wearing a red shirt?"
    assert parse_vqa_answer("Yes, they are.")
    assert parse_vqa_answer("I think yes")
    assert not parse_vqa_answer("No.")
    assert not parse_vqa_answer("maybe")
    assert not parse_vqa_answer("no, yes")
