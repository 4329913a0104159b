"""Ground-truth motion, range sensing and the joint extended Kalman filter.

Node ids are integers: robots are ``0..N-1`` and anchor ``k`` is ``N + k``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularInnovation
from .gaussian import Gaussian2, validate_spd

log = logging.getLogger(__name__)

EPS_DIST = 1e-6


@dataclass(frozen=True)
class NoiseModel:
    R: np.ndarray  # per-robot motion covariance, 2x2
    Q: float  # range variance
    rho: float  # sensing radius

    def __post_init__(self):
        object.__setattr__(self, "R", validate_spd(self.R))
        if not self.Q > 0:
            raise ValueError("Q must be positive")
        if not self.rho > 0:
            raise ValueError("rho must be positive")


@dataclass(frozen=True)
class EdgeObservation:
    i: int
    j: int
    range: float
    time_index: int = 0

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("an edge needs two distinct nodes")
        if self.range < 0:
            raise ValueError("range must be non-negative")


@dataclass
class WorldState:
    robot_positions: np.ndarray  # shape (2N,)
    anchor_positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        self.robot_positions = np.asarray(self.robot_positions, dtype=float).reshape(-1)
        self.anchor_positions = np.asarray(self.anchor_positions, dtype=float).reshape(-1, 2)
        if not (np.all(np.isfinite(self.robot_positions)) and np.all(np.isfinite(self.anchor_positions))):
            raise ValueError("positions must be finite")

    @property
    def n_robots(self) -> int:
        return self.robot_positions.size // 2

    def position(self, node: int) -> np.ndarray:
        n = self.n_robots
        if node < n:
            return self.robot_positions[2 * node : 2 * node + 2]
        return self.anchor_positions[node - n]


@dataclass
class JointBelief:
    mean: np.ndarray  # (2N,)
    cov: np.ndarray  # (2N, 2N)
    time_index: int = 0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.cov = np.asarray(self.cov, dtype=float)
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise ValueError("cov shape does not match mean")

    @property
    def n_robots(self) -> int:
        return self.mean.size // 2

    def copy(self) -> "JointBelief":
        return JointBelief(self.mean.copy(), self.cov.copy(), self.time_index)

    def marginal(self, i: int) -> Gaussian2:
        s = slice(2 * i, 2 * i + 2)
        return Gaussian2(self.mean[s], self.cov[s, s])

    def trace(self, i: int) -> float:
        return float(self.cov[2 * i, 2 * i] + self.cov[2 * i + 1, 2 * i + 1])


def node_pairs(n_robots: int, n_anchors: int) -> list[tuple[int, int]]:
    """All robot-robot pairs (once) followed by robot-anchor pairs, in sorted order."""
    pairs = [(i, j) for i in range(n_robots) for j in range(i + 1, n_robots)]
    pairs += [(i, n_robots + k) for i in range(n_robots) for k in range(n_anchors)]
    return sorted(pairs)


def step_truth(
    world: WorldState,
    controls: np.ndarray,
    noise: NoiseModel,
    rng: np.random.Generator,
    meas_rng: np.random.Generator | None = None,
    time_index: int = 0,
) -> tuple[WorldState, list[EdgeObservation]]:
    """Advance the true positions and sense every pair within ``rho``.

    Range noise is drawn for every pair whether or not it is in range, so the
    generator consumption does not depend on the trajectory.
    """
    n = world.n_robots
    u = np.asarray(controls, dtype=float).reshape(n, 2)
    w = rng.multivariate_normal(np.zeros(2), noise.R, size=n, method="cholesky")
    pos = world.robot_positions + (u + w).reshape(-1)
    new = WorldState(pos, world.anchor_positions.copy())
    pairs = node_pairs(n, len(new.anchor_positions))
    meas_rng = rng if meas_rng is None else meas_rng
    eps = meas_rng.standard_normal(len(pairs)) * np.sqrt(noise.Q)
    obs = []
    for (i, j), e in zip(pairs, eps):
        dist = float(np.linalg.norm(new.position(i) - new.position(j)))
        if dist <= noise.rho:
            obs.append(EdgeObservation(i, j, max(0.0, dist + e), time_index))
    return new, obs


def ekf_predict(bel: JointBelief, controls: np.ndarray, noise: NoiseModel) -> JointBelief:
    n = bel.n_robots
    cov = bel.cov.copy()
    for i in range(n):
        cov[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] += noise.R
    mean = bel.mean + np.asarray(controls, dtype=float).reshape(-1)
    return JointBelief(mean, cov, bel.time_index + 1)


def range_jacobian(mean: np.ndarray, i: int, j: int, anchors: np.ndarray) -> tuple[np.ndarray, float] | None:
    """Jacobian row of ``||p_i - p_j||`` at ``mean`` and the predicted range.

    Returns ``None`` when the predicted nodes are closer than ``EPS_DIST``.
    """
    n = mean.size // 2
    pi = mean[2 * i : 2 * i + 2]
    pj = mean[2 * j : 2 * j + 2] if j < n else anchors[j - n]
    diff = pi - pj
    dist = float(np.hypot(diff[0], diff[1]))
    if dist < EPS_DIST:
        return None
    H = np.zeros(mean.size)
    H[2 * i : 2 * i + 2] = diff / dist
    if j < n:
        H[2 * j : 2 * j + 2] = -diff / dist
    return H, dist


def scalar_update(mean: np.ndarray, cov: np.ndarray, H: np.ndarray, innov: float, Q: float):
    PH = cov @ H
    S = float(H @ PH) + Q
    if not S > 0:
        raise SingularInnovation(f"innovation variance {S}")
    K = PH / S
    mean = mean + K * innov
    cov = cov - np.outer(K, PH)
    return mean, 0.5 * (cov + cov.T)


def ekf_update(
    bel: JointBelief, obs: list[EdgeObservation], anchors: np.ndarray, noise: NoiseModel
) -> JointBelief:
    """Sequential scalar range updates, in (time, i, j) order."""
    anchors = np.asarray(anchors, dtype=float).reshape(-1, 2)
    mean, cov = bel.mean.copy(), bel.cov.copy()
    for ob in sorted(obs, key=lambda o: (o.time_index, o.i, o.j)):
        i, j = (ob.i, ob.j) if ob.i < ob.j else (ob.j, ob.i)
        lin = range_jacobian(mean, i, j, anchors)
        if lin is None:
            log.warning("skipping range update %d-%d: predicted nodes coincide", i, j)
            continue
        H, dist = lin
        mean, cov = scalar_update(mean, cov, H, ob.range - dist, noise.Q)
    return JointBelief(mean, cov, bel.time_index)


def edge_marginal(bel: JointBelief, i: int, j: int, anchors: np.ndarray) -> tuple[Gaussian2, Gaussian2, np.ndarray]:
    """Marginals of nodes ``i`` and ``j`` and their cross-covariance block."""
    n = bel.n_robots
    anchors = np.asarray(anchors, dtype=float).reshape(-1, 2)

    def node(k):
        if k < n:
            return bel.marginal(k)
        return Gaussian2(anchors[k - n], np.zeros((2, 2)))

    if i < n and j < n:
        cross = bel.cov[2 * i : 2 * i + 2, 2 * j : 2 * j + 2].copy()
    else:
        cross = np.zeros((2, 2))
    return node(i), node(j), cross
