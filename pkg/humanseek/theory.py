"""
Numeric checks of the density-matching value bounds.

For densities mu_true and mu_est over a finite state set, the rewards maximising <mu, R> under
||R|| <= 1, mapped affinely into [R_min, R_max], satisfy

    |<mu_true, R_est> - <mu_true, R_true>| <= 3 (R_max - R_min) d_var(mu_true, mu_est)

and d_var <= sqrt(2) d_H. The sample-complexity check estimates mu from n draws and reports the
median value gap, which should shrink as n grows.
"""
import math
from dataclasses import dataclass
from typing import Dict
from typing import List
from typing import Sequence

import numpy as np
from loguru import logger

from humanseek.kdmrl import exact_unit_norm_reward

__all__ = [
    "TheoremTrial",
    "variational_distance",
    "hellinger_distance",
    "bounded_reward",
    "value_gap",
    "run_theorem_trials",
    "count_violations",
    "run_sample_complexity",
    "theory_report",
]

MAX_STATES = 256


def _check_distribution(p: np.ndarray, name: str, tol: float = 1e-9) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    if (p < 0).any():
        raise ValueError(f"{name} has negative entries")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"{name} sums to {p.sum()}, not 1")
    return p


def _pair(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"Distributions over different supports: {p.shape} vs {q.shape}")
    return p, q


def variational_distance(p, q) -> float:
    """0.5 * sum |p - q|, which equals the sum of (p - q) over the states where p > q."""
    p, q = _pair(p, q)
    p = _check_distribution(p, "p")
    q = _check_distribution(q, "q")
    half_l1 = 0.5 * float(np.abs(p - q).sum())
    excess = float((p - q)[p > q].sum())
    assert math.isclose(half_l1, excess, rel_tol=1e-9, abs_tol=1e-12)
    return half_l1


def hellinger_distance(p, q) -> float:
    """d_H with d_H^2 = 0.5 * sum (sqrt p - sqrt q)^2."""
    p, q = _pair(p, q)
    if (p < 0).any() or (q < 0).any():
        raise ValueError("Hellinger distance needs non-negative entries")
    return math.sqrt(0.5 * float(((np.sqrt(p) - np.sqrt(q)) ** 2).sum()))


def bounded_reward(mu: np.ndarray, R_min: float = 0.0, R_max: float = 1.0) -> np.ndarray:
    """Unit-norm maximiser of <mu, R> mapped affinely from [0, 1] onto [R_min, R_max]."""
    return R_min + (R_max - R_min) * exact_unit_norm_reward(mu)


def value_gap(mu_true: np.ndarray, mu_est: np.ndarray, R_min: float = 0.0, R_max: float = 1.0) -> float:
    R_true = bounded_reward(mu_true, R_min, R_max)
    R_est = bounded_reward(mu_est, R_min, R_max)
    return abs(float(mu_true @ R_est) - float(mu_true @ R_true))


@dataclass
class TheoremTrial:
    n_states: int
    mu_true: np.ndarray
    mu_est: np.ndarray
    R_min: float
    R_max: float
    gap: float
    bound: float

    def __post_init__(self):
        _check_distribution(self.mu_true, "mu_true", tol=1e-12)
        _check_distribution(self.mu_est, "mu_est", tol=1e-12)

    @property
    def violated(self) -> bool:
        return self.gap > self.bound + 1e-12

    @property
    def ratio(self) -> float:
        return self.gap / self.bound if self.bound > 0 else 0.0


def _normalise(x: np.ndarray) -> np.ndarray:
    return x / x.sum()


def run_theorem_trials(n_trials: int, n_states: int = 64, seed: int = 1) -> List[TheoremTrial]:
    """
    Random true densities, each perturbed towards another random density by a random mixing weight
    (zero for the first trial), with random reward ranges.
    """
    if not 2 <= n_states <= MAX_STATES:
        raise ValueError(f"n_states must lie in [2, {MAX_STATES}]")
    rng = np.random.default_rng(seed)
    trials = []
    for index in range(n_trials):
        mu_true = _normalise(rng.dirichlet(np.ones(n_states)))
        eps = 0.0 if index == 0 else float(rng.uniform(0.0, 1.0))
        mu_est = _normalise((1.0 - eps) * mu_true + eps * rng.dirichlet(np.ones(n_states)))
        R_min = float(rng.uniform(-1.0, 0.0))
        R_max = R_min + float(rng.uniform(0.1, 2.0))
        gap = value_gap(mu_true, mu_est, R_min, R_max)
        bound = 3.0 * (R_max - R_min) * variational_distance(mu_true, mu_est)
        trials.append(TheoremTrial(n_states, mu_true, mu_est, R_min, R_max, gap, bound))
    return trials


def count_violations(trials: Sequence[TheoremTrial]) -> int:
    return sum(trial.violated for trial in trials)


def _ground_truth(n_states: int, rng: np.random.Generator) -> np.ndarray:
    """Mixture of two discretised bumps over the state index."""
    x = np.arange(n_states, dtype=float)
    centres = rng.uniform(0.2, 0.8, 2) * n_states
    width = max(1.0, n_states / 10.0)
    density = np.exp(-0.5 * ((x - centres[0]) / width) ** 2) + 0.5 * np.exp(-0.5 * ((x - centres[1]) / width) ** 2)
    return _normalise(density + 1e-3)


def run_sample_complexity(
    ns: Sequence[int] = (32, 64, 128, 256, 512, 1024), n_seeds: int = 50, n_states: int = 64, seed: int = 0
) -> Dict[int, float]:
    """Median value gap over `n_seeds` empirical density estimates from n samples, for each n."""
    mu_true = _ground_truth(n_states, np.random.default_rng(seed))
    medians = dict()
    for n in ns:
        gaps = []
        for s in range(n_seeds):
            rng = np.random.default_rng([seed, int(n), s])
            counts = np.bincount(rng.choice(n_states, size=int(n), p=mu_true), minlength=n_states)
            gaps.append(value_gap(mu_true, counts / counts.sum()))
        medians[int(n)] = float(np.median(gaps))
        logger.debug(f"n={n}: median value gap {medians[int(n)]:.3e}")
    return medians


def theory_report(n_trials: int = 10000, n_states: int = 64, seed: int = 1) -> Dict:
    trials = run_theorem_trials(n_trials, n_states, seed)
    violations = count_violations(trials)
    if violations:
        logger.warning(f"{violations} of {n_trials} trials violate the value-gap bound")
    return dict(trials=n_trials, violations=violations, max_ratio=max(trial.ratio for trial in trials))
