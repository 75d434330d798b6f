"""
Kernel density matching reward learning: the demonstrations' leverage-weighted state density is
estimated with a normalised RBF, and the reward, a kernel expansion over the inducing states, is the
closed-form maximiser of the regularised inner product with that density.
"""
import json
import math
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Union

import numpy as np
from loguru import logger
from scipy import linalg

from humanseek.core import ApproachState
from humanseek.core import Pose2D
from humanseek.core import StateGrid
from humanseek.core import to_human_frame
from humanseek.exceptions import DemonstrationFormatError
from humanseek.exceptions import KernelSolveError
from humanseek.perception import gaze_flag
from humanseek.reward import RewardField
from humanseek.reward import kernel_matrix
from humanseek.reward import rbf_apply
from humanseek.reward import scaled_differences

__all__ = [
    "KdmrlParams",
    "Demonstration",
    "KdmrlFit",
    "leverage",
    "leverage_weights",
    "stack_demonstrations",
    "density_kernel_matrix",
    "estimate_density",
    "solve_alpha",
    "objective",
    "reward_at",
    "dense_reward",
    "fit_kdmrl",
    "exact_unit_norm_reward",
    "demonstration_from_world_log",
    "load_demonstrations",
]


@dataclass(frozen=True)
class KdmrlParams:
    lam: float = 0.01
    beta: float = 0.2
    delta: float = 0.8
    Z: float = 200.0
    sigma_k: float = 1.0
    sigma_mu: float = 0.5

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if not self.Z > 0:
            raise ValueError("Z must be positive")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if not (self.sigma_k > 0 and self.sigma_mu > 0):
            raise ValueError("kernel widths must be positive")

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class Demonstration:
    states: tuple

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        if not self.states:
            raise ValueError("A demonstration needs at least one state")

    @property
    def T(self) -> int:
        return len(self.states)

    def as_array(self) -> np.ndarray:
        return np.array([s.as_vector() for s in self.states])


def leverage(T: int, delta: float) -> np.ndarray:
    """gamma_t = delta ** (T - t) for t = 1..T."""
    if T < 1:
        raise ValueError("T must be at least 1")
    exponents = T - np.arange(1, T + 1)
    # 0 ** 0 is 1 for the final state
    return np.power(float(delta), exponents.astype(float))


def leverage_weights(gamma: np.ndarray) -> np.ndarray:
    """g_k = cos(pi / 2 * (1 - gamma_k)); exactly 0 where gamma_k is 0."""
    gamma = np.asarray(gamma, dtype=float)
    return np.where(gamma == 0.0, 0.0, np.cos(np.pi / 2.0 * (1.0 - gamma)))


def stack_demonstrations(demos: Sequence[Demonstration], delta: float):
    """Concatenated data states (N_D, 5) and their weights g_k, each demo with its own leverage."""
    if not demos:
        raise ValueError("At least one demonstration is required")
    states = np.concatenate([demo.as_array() for demo in demos], axis=0)
    weights = np.concatenate([leverage_weights(leverage(demo.T, delta)) for demo in demos])
    return states, weights


def _axis_normaliser(values: np.ndarray, grid: StateGrid, sigma: float) -> np.ndarray:
    """Per-point sum over the grid of the separable kernel, so each column of k_mu sums to one."""
    total = np.ones(len(values))
    for dim in (0, 1, 2, 4):
        d = scaled_differences(grid.bins[dim], values[:, dim], grid, dim)
        total *= np.exp(-(d**2) / (2.0 * sigma**2)).sum(axis=0)
    return total


def density_kernel_matrix(a: np.ndarray, data: np.ndarray, sigma: float, grid: StateGrid) -> np.ndarray:
    """[K]_ij = k_mu(a_i, data_j), with k_mu(., data_j) summing to one over the grid."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    return kernel_matrix(a, data, sigma, grid) / _axis_normaliser(data, grid, sigma)[None, :]


def estimate_density(
    demos: Sequence[Demonstration], params: KdmrlParams = KdmrlParams(), grid: StateGrid = StateGrid()
) -> np.ndarray:
    """mu_hat on every grid state, returned with the grid's (x, y, theta, g, v) shape."""
    data, weights = stack_demonstrations(demos, params.delta)
    scale = weights / _axis_normaliser(data, grid, params.sigma_mu) / params.Z

    factors = []
    for dim in (0, 1, 2):
        d = scaled_differences(data[:, dim], grid.bins[dim], grid, dim)
        factors.append(np.exp(-(d**2) / (2.0 * params.sigma_mu**2)))
    gaze = np.isclose(data[:, 3][:, None], np.asarray(grid.g_bins, dtype=float)[None, :]).astype(float)
    d = scaled_differences(data[:, 4], grid.v_bins, grid, 4)
    speed = np.exp(-(d**2) / (2.0 * params.sigma_mu**2))
    return np.einsum("k,kx,ky,kt,kg,kv->xytgv", scale, *factors, gaze, speed, optimize=True)


def _check_finite(matrix: np.ndarray, what: str) -> None:
    bad = np.argwhere(~np.isfinite(matrix))
    if bad.size:
        index = tuple(int(i) for i in bad[0])
        raise KernelSolveError(f"Non-finite {what} entry at {index}", index=index)


def _solve_symmetric(system: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        factor = linalg.cho_factor(system, lower=True, check_finite=False)
        return linalg.cho_solve(factor, rhs, check_finite=False)
    except linalg.LinAlgError:
        logger.warning("Cholesky factorisation failed, falling back to a symmetric solver")
        return linalg.solve(system, rhs, assume_a="sym")


def solve_alpha(
    U: np.ndarray,
    D: np.ndarray,
    g: np.ndarray,
    params: KdmrlParams = KdmrlParams(),
    grid: StateGrid = StateGrid(),
) -> np.ndarray:
    """
    Maximiser of the regularised objective,
    alpha = (1/Z) (lambda K_U + beta I)^-1 K_U K_D g.
    The kernel vanishes across gaze values, so the system is solved per gaze block.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    g = np.asarray(g, dtype=float)
    alpha = np.zeros(len(U))
    if not np.any(g):
        return alpha

    for gaze in np.unique(U[:, 3]):
        block = np.isclose(U[:, 3], gaze)
        Ub = U[block]
        K_U = kernel_matrix(Ub, Ub, params.sigma_k, grid)
        K_D = density_kernel_matrix(Ub, D, params.sigma_mu, grid)
        _check_finite(K_U, "K_U")
        _check_finite(K_D, "K_D")
        rhs = K_U @ (K_D @ g) / params.Z
        system = params.lam * K_U + params.beta * np.eye(len(Ub))
        solution = _solve_symmetric(system, rhs)
        _check_finite(solution[:, None], "alpha")
        alpha[block] = solution
    return alpha


def objective(
    alpha: np.ndarray,
    U: np.ndarray,
    D: np.ndarray,
    g: np.ndarray,
    params: KdmrlParams = KdmrlParams(),
    grid: StateGrid = StateGrid(),
) -> float:
    """
    (1/Z) a^T K_U K_D g - lambda/2 a^T K_U a - beta/2 a^T a, accumulated per gaze block (K_U is
    block diagonal across gaze values).
    """
    alpha = np.asarray(alpha, dtype=float)
    U = np.atleast_2d(np.asarray(U, dtype=float))
    g = np.asarray(g, dtype=float)
    linear = quadratic = 0.0
    for gaze in np.unique(U[:, 3]):
        block = np.isclose(U[:, 3], gaze)
        a = alpha[block]
        K_U = kernel_matrix(U[block], U[block], params.sigma_k, grid)
        K_D = density_kernel_matrix(U[block], D, params.sigma_mu, grid)
        linear += a @ K_U @ (K_D @ g) / params.Z
        quadratic += 0.5 * params.lam * a @ K_U @ a
    return float(linear - quadratic - 0.5 * params.beta * alpha @ alpha)


def reward_at(
    x: Union[ApproachState, np.ndarray], alpha: np.ndarray, U: np.ndarray, sigma_k: float, grid: StateGrid = StateGrid()
) -> Union[float, np.ndarray]:
    """sum_i alpha_i k(x, U_i) for one state or an (N, 5) array of states."""
    single = isinstance(x, ApproachState) or np.ndim(x) == 1
    states = x.as_vector()[None, :] if isinstance(x, ApproachState) else np.atleast_2d(x)
    values = kernel_matrix(states, U, sigma_k, grid) @ np.asarray(alpha, dtype=float)
    return float(values[0]) if single else values


def dense_reward(alpha: np.ndarray, grid: StateGrid, sigma_k: float) -> np.ndarray:
    """The kernel expansion over the grid's inducing states evaluated at every grid state."""
    coefficients = np.zeros(grid.size)
    coefficients[grid.inducing_mask] = alpha
    return rbf_apply(coefficients.reshape(grid.shape), sigma_k, grid)


@dataclass
class KdmrlFit:
    alpha: np.ndarray
    field: RewardField
    objective: float
    alpha_norm: float
    meta: Dict = field(default_factory=dict)


def fit_kdmrl(
    demos: Sequence[Demonstration], params: KdmrlParams = KdmrlParams(), grid: StateGrid = StateGrid()
) -> KdmrlFit:
    D, g = stack_demonstrations(demos, params.delta)
    U = grid.inducing_states
    logger.info(f"Fitting KDMRL on {len(D)} demonstration states and {len(U)} inducing states")
    alpha = solve_alpha(U, D, g, params, grid)
    value = objective(alpha, U, D, g, params, grid)
    values = dense_reward(alpha, grid, params.sigma_k)
    meta = dict(source="kdmrl", demos=len(demos), states=int(len(D)), params=params.to_dict())
    return KdmrlFit(
        alpha=alpha,
        field=RewardField(values=values, grid=grid, meta=meta),
        objective=value,
        alpha_norm=float(np.linalg.norm(alpha)),
        meta=meta,
    )


def exact_unit_norm_reward(mu: np.ndarray) -> np.ndarray:
    """argmax over ||R|| <= 1 of <mu, R>, i.e. mu / ||mu||."""
    mu = np.asarray(mu, dtype=float)
    norm = np.linalg.norm(mu)
    if norm == 0:
        raise ValueError("The density vector is zero; the maximiser is undefined")
    return mu / norm


def demonstration_from_world_log(records: Sequence[Dict]) -> Demonstration:
    """World-frame samples {robot: {x, y, theta}, human: {x, y, theta}, v[, g]} to human-frame states."""
    states = []
    for record in records:
        robot = Pose2D.from_dict(record["robot"])
        human = Pose2D.from_dict(record["human"])
        relative = to_human_frame(robot, human)
        g = record.get("g")
        if g is None:
            g = gaze_flag(human.theta, (human.x, human.y), (robot.x, robot.y))
        states.append(ApproachState(relative.x, relative.y, relative.theta, int(g), float(record["v"])))
    return Demonstration(states=tuple(states))


def load_demonstrations(path: Union[str, Path]) -> List[Demonstration]:
    """
    JSONL demonstrations, one sample per line, either human-frame
    {demo_id, t, x, y, theta, g, v} or world-frame {demo_id, t, robot, human, v}.
    Demonstrations keep the order in which their ids first appear; samples are sorted by t.
    """
    grouped: Dict[str, List] = dict()
    with open(path, "r") as fil:
        for lineno, line in enumerate(fil, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                demo_id = str(record["demo_id"])
                t = float(record["t"])
                if "robot" in record and "human" in record:
                    sample = ("world", record)
                else:
                    state = ApproachState(
                        float(record["x"]), float(record["y"]), float(record["theta"]), int(record["g"]), float(record["v"])
                    )
                    sample = ("human", state)
                if not all(math.isfinite(v) for v in (t, float(record["v"]))):
                    raise ValueError("non-finite value")
            except (ValueError, KeyError, TypeError) as ex:
                raise DemonstrationFormatError(f"malformed demonstration sample ({ex})", line=lineno)
            grouped.setdefault(demo_id, []).append((t, sample))

    if not grouped:
        raise DemonstrationFormatError(f"{path} contains no demonstrations")

    demos = []
    for samples in grouped.values():
        samples.sort(key=lambda item: item[0])
        kinds = {kind for _, (kind, _) in samples}
        if kinds == {"world"}:
            demos.append(demonstration_from_world_log([record for _, (_, record) in samples]))
        elif kinds == {"human"}:
            demos.append(Demonstration(states=tuple(state for _, (_, state) in samples)))
        else:
            raise DemonstrationFormatError("a demonstration mixes world-frame and human-frame samples")
    logger.info(f"Loaded {len(demos)} demonstrations from {path}")
    return demos
