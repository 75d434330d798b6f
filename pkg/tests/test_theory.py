import math

import numpy as np
import pytest

from humanseek.theory import bounded_reward
from humanseek.theory import count_violations
from humanseek.theory import hellinger_distance
from humanseek.theory import run_sample_complexity
from humanseek.theory import run_theorem_trials
from humanseek.theory import theory_report
from humanseek.theory import value_gap
from humanseek.theory import variational_distance


def _random_triples(count, n_states=16, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield tuple(rng.dirichlet(np.ones(n_states)) for _ in range(3))


def test_variational_distance():
    assert variational_distance([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert variational_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
    assert variational_distance([0.2, 0.3, 0.5], [0.3, 0.3, 0.4]) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        variational_distance([0.5, 0.6], [0.5, 0.5])
    with pytest.raises(ValueError):
        variational_distance([0.5, 0.5], [1.0, 0.0, 0.0])


def test_hellinger_distance():
    assert hellinger_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
    assert hellinger_distance([0.25, 0.75], [0.25, 0.75]) == 0.0
    with pytest.raises(ValueError):
        hellinger_distance([-0.1, 1.1], [0.5, 0.5])


def test_distances_are_metrics():
    for p, q, r in _random_triples(200):
        for distance in (variational_distance, hellinger_distance):
            assert distance(p, q) == pytest.approx(distance(q, p))
            assert distance(p, r) <= distance(p, q) + distance(q, r) + 1e-12
        assert variational_distance(p, q) <= math.sqrt(2.0) * hellinger_distance(p, q) + 1e-12
        assert hellinger_distance(p, q) ** 2 <= variational_distance(p, q) + 1e-12


def test_bounded_reward_range():
    mu = np.array([0.1, 0.2, 0.7])
    reward = bounded_reward(mu, -1.0, 2.0)
    assert reward.min() >= -1.0 and reward.max() <= 2.0
    assert np.argmax(reward) == 2
    assert value_gap(mu, mu) == 0.0


def test_value_gap_bound_holds():
    report = theory_report(n_trials=10000, n_states=64, seed=1)
    assert report["trials"] == 10000
    assert report["violations"] == 0
    assert report["max_ratio"] <= 2.0 * math.sqrt(2.0) / 3.0 + 1e-9


def test_theorem_trials():
    trials = run_theorem_trials(50, n_states=8, seed=4)
    assert len(trials) == 50
    assert trials[0].gap == pytest.approx(0.0, abs=1e-12)
    assert count_violations(trials) == 0
    assert all(trial.R_max > trial.R_min for trial in trials)
    again = run_theorem_trials(50, n_states=8, seed=4)
    assert [t.gap for t in trials] == [t.gap for t in again]
    with pytest.raises(ValueError):
        run_theorem_trials(5, n_states=1)
    with pytest.raises(ValueError):
        run_theorem_trials(5, n_states=512)


def test_value_gap_shrinks_with_samples():
    medians = run_sample_complexity((32, 64, 128, 256, 512, 1024), n_seeds=50, n_states=64, seed=0)
    gaps = [medians[n] for n in sorted(medians)]
    assert all(later <= earlier for earlier, later in zip(gaps, gaps[1:]))
    assert gaps[-1] < gaps[0]
