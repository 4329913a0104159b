"""Edge probabilities over the planning horizon, weighted network topologies,
and the expected planning cost under independent edges."""
from __future__ import annotations

import itertools
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .baselines import SamplerConfig, bernoulli, linear, random_sampling
from .belief import EPS_DIST, JointBelief, NoiseModel, edge_marginal, ekf_predict, node_pairs
from .errors import SingularInnovation
from .gaussian import Gaussian2, eig2
from .series import DEFAULT_DELTA_F, Method, apse

PRUNE_EPS = 1e-6
EXHAUSTIVE_CAP = 4096
SAMPLE_DRAWS = 512
_DEGENERATE_VAR = 1e-12

Edge = tuple[int, int, int]  # (step t, i, j), t counted from 1


@dataclass(frozen=True)
class EdgeProbabilitySet:
    entries: list[tuple[int, int, int, float]]
    method: Method

    def __post_init__(self):
        for _, _, _, p in self.entries:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"edge probability {p} outside [0, 1]")

    @property
    def edges(self) -> list[Edge]:
        return [(t, i, j) for t, i, j, _ in self.entries]

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for *_, p in self.entries], dtype=float)


@dataclass(frozen=True)
class WeightedTopology:
    active_edges: frozenset
    weight: float


@dataclass
class ProbabilityCache:
    """Memo of predictor calls keyed by the rounded relative displacement.

    Predicted covariances do not depend on the candidate controls, so across
    the candidates of one planning call only a few distinct displacements occur.
    """

    method: Method
    rho: float
    delta_f: float = DEFAULT_DELTA_F
    sampler: SamplerConfig | None = None
    decimals: int = 9
    table: dict = field(default_factory=dict)
    calls: int = 0

    def __post_init__(self):
        self.method = Method(self.method)

    def __call__(self, d: Gaussian2) -> float:
        return float(self.many(d.mean[None, :], d.cov)[0])

    def many(self, means: np.ndarray, cov: np.ndarray) -> np.ndarray:
        """Probabilities for several displacement means sharing one covariance."""
        cov_key = tuple(np.round(cov, self.decimals).ravel() + 0.0)
        keys = np.round(means, self.decimals) + 0.0
        out = np.empty(len(means))
        for k, (m, key) in enumerate(zip(means, map(tuple, keys))):
            hit = self.table.get((key, cov_key))
            if hit is None:
                hit = self._evaluate(Gaussian2(m, cov))
                self.table[(key, cov_key)] = hit
            out[k] = hit
        return out

    def _evaluate(self, d: Gaussian2) -> float:
        lam, _ = eig2(d.cov)
        if lam[0] <= _DEGENERATE_VAR:
            # no spread: the edge is decided by the mean alone
            return 1.0 if float(np.hypot(*d.mean)) <= self.rho else 0.0
        if lam[1] <= _DEGENERATE_VAR * lam[0]:
            d = Gaussian2(d.mean, d.cov + _DEGENERATE_VAR * lam[0] * np.eye(2))
        if self.method is Method.APSE:
            return apse(d, self.rho, self.delta_f).value
        if self.method is Method.BERNOULLI:
            return bernoulli(d, self.rho).value
        if self.method is Method.LINEAR:
            return linear(d, self.rho).value
        if self.method in (Method.RANDOM, Method.ORACLE):
            base = self.sampler or SamplerConfig()
            cfg = SamplerConfig(base.dim, base.seed, base.stream + self.calls)
            self.calls += 1
            return random_sampling(d, self.rho, cfg).value
        raise ValueError(f"unknown method {self.method}")


def _as_controls(controls, n: int) -> np.ndarray:
    u = np.asarray(controls, dtype=float)
    if u.ndim == 1:
        u = u.reshape(1, n, 2)
    return u.reshape(u.shape[0], n, 2)


def open_loop(bel: JointBelief, controls, noise: NoiseModel) -> list[JointBelief]:
    """Beliefs after each of the horizon's predict steps, with no updates."""
    u = _as_controls(controls, bel.n_robots)
    out, cur = [], bel
    for step in u:
        cur = ekf_predict(cur, step, noise)
        out.append(cur)
    return out


def predict_edge_probabilities(
    bel: JointBelief,
    controls,
    noise: NoiseModel,
    method: Method | str,
    delta_f: float = DEFAULT_DELTA_F,
    anchors=None,
    cache: ProbabilityCache | None = None,
    sampler: SamplerConfig | None = None,
) -> EdgeProbabilitySet:
    method = Method(method)
    anchors = np.zeros((0, 2)) if anchors is None else np.asarray(anchors, dtype=float).reshape(-1, 2)
    u = _as_controls(controls, bel.n_robots)
    if len(u) < 1:
        raise ValueError("horizon must be at least one step")
    cache = cache or ProbabilityCache(method, noise.rho, delta_f, sampler)
    pairs = node_pairs(bel.n_robots, len(anchors))
    entries = []
    for t, b in enumerate(open_loop(bel, u, noise), start=1):
        for i, j in pairs:
            gi, gj, cross = edge_marginal(b, i, j, anchors)
            cov = gi.cov + gj.cov - cross - cross.T
            p = cache(Gaussian2(gi.mean - gj.mean, cov))
            entries.append((t, i, j, min(1.0, max(0.0, p))))
    return EdgeProbabilitySet(entries, method)


@dataclass(frozen=True)
class TopologyBatch:
    """Topologies as a boolean mask over ``edges`` with one weight per row."""

    edges: list[Edge]
    masks: np.ndarray  # (K, E) bool
    weights: np.ndarray  # (K,)

    def topologies(self) -> list[WeightedTopology]:
        return [
            WeightedTopology(frozenset(e for e, on in zip(self.edges, row) if on), float(w))
            for row, w in zip(self.masks, self.weights)
        ]

    @classmethod
    def from_topologies(cls, edges: Sequence[Edge], topologies: Sequence[WeightedTopology]) -> "TopologyBatch":
        edges = list(edges)
        masks = np.array([[e in t.active_edges for e in edges] for t in topologies], dtype=bool)
        return cls(edges, masks.reshape(len(topologies), len(edges)), np.array([t.weight for t in topologies]))


def masks_from_probabilities(
    p: np.ndarray,
    prune_eps: float = PRUNE_EPS,
    cap: int = EXHAUSTIVE_CAP,
    draws: int = SAMPLE_DRAWS,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Edge-outcome masks and weights for independent edges with probabilities ``p``.

    Near-certain edges are fixed; the rest are enumerated when ``2^u <= cap``
    and sampled otherwise.
    """
    if not 0.0 <= prune_eps < 0.5:
        raise ValueError("prune_eps must lie in [0, 0.5)")
    p = np.asarray(p, dtype=float)
    fixed_on = p >= 1.0 - prune_eps
    uncertain = np.flatnonzero((p > prune_eps) & ~fixed_on)
    u = len(uncertain)
    pu = p[uncertain]
    if 2**u <= cap:
        outcomes = np.array(list(itertools.product((True, False), repeat=u)), dtype=bool).reshape(2**u, u)
        weights = np.prod(np.where(outcomes, pu, 1.0 - pu), axis=1)
    else:
        rng = rng or np.random.default_rng(0)
        drawn = rng.random((draws, u)) < pu
        outcomes, counts = np.unique(drawn, axis=0, return_counts=True)
        weights = counts / draws
    masks = np.repeat(fixed_on[None, :], len(outcomes), axis=0)
    masks[:, uncertain] = outcomes
    return masks, weights


def pruned_probabilities(p: np.ndarray, prune_eps: float = PRUNE_EPS) -> np.ndarray:
    """Near-certain edges snapped to exactly 0 or 1."""
    p = np.asarray(p, dtype=float)
    return np.where(p <= prune_eps, 0.0, np.where(p >= 1.0 - prune_eps, 1.0, p))


def all_outcomes(n_edges: int) -> np.ndarray:
    """Every edge outcome as rows of a boolean matrix, in enumeration order."""
    return np.array(list(itertools.product((True, False), repeat=n_edges)), dtype=bool).reshape(2**n_edges, n_edges)


def topology_batch(
    probs: EdgeProbabilitySet,
    prune_eps: float = PRUNE_EPS,
    cap: int = EXHAUSTIVE_CAP,
    draws: int = SAMPLE_DRAWS,
    rng: np.random.Generator | None = None,
) -> TopologyBatch:
    masks, weights = masks_from_probabilities(probs.probabilities, prune_eps, cap, draws, rng)
    return TopologyBatch(probs.edges, masks, weights)


def enumerate_topologies(
    probs: EdgeProbabilitySet,
    prune_eps: float = PRUNE_EPS,
    cap: int = EXHAUSTIVE_CAP,
    rng: np.random.Generator | None = None,
) -> list[WeightedTopology]:
    return topology_batch(probs, prune_eps, cap, rng=rng).topologies()


CostFn = Callable[[np.ndarray], np.ndarray]  # batched (K, n, n) covariances -> (K,) costs


def block_trace(i: int) -> CostFn:
    return lambda cov: cov[..., 2 * i, 2 * i] + cov[..., 2 * i + 1, 2 * i + 1]


def weighted_traces(weights: dict[int, float]) -> CostFn:
    def cost(cov):
        return sum(w * block_trace(i)(cov) for i, w in weights.items())

    return cost


def batched_rollout(
    bel: JointBelief,
    candidates: np.ndarray,
    owner: np.ndarray,
    edges: Sequence[Edge],
    masks: np.ndarray,
    noise: NoiseModel,
    cost_fn: CostFn,
    anchors=None,
) -> np.ndarray:
    """Accumulated cost for each row of an edge-outcome batch.

    Row ``k`` follows the controls ``candidates[owner[k]]`` (each of shape
    ``(L, N, 2)``) and applies the edges flagged in ``masks[k]``. Each step
    predicts, then applies that step's active edges as range updates with the
    maximum-likelihood pseudo-measurement. The innovation is zero, so means
    follow the open-loop prediction and only covariances differ.

    Rows that agree on their controls and edge outcomes up to step ``t`` share
    one covariance at that step, so the work grows with the number of distinct
    prefixes rather than with the number of rows.
    """
    anchors = np.zeros((0, 2)) if anchors is None else np.asarray(anchors, dtype=float).reshape(-1, 2)
    n = bel.n_robots
    candidates = np.asarray(candidates, dtype=float)
    owner = np.asarray(owner)
    C, L = candidates.shape[:2]
    K = len(owner)
    flat = candidates.reshape(C, L, 2 * n)
    means = bel.mean + np.cumsum(flat, axis=1)
    R_blocks = np.kron(np.eye(n), noise.R)
    cols_at = {t: sorted((c for c, e in enumerate(edges) if e[0] == t), key=lambda c: edges[c]) for t in range(1, L + 1)}
    compact = sum(len(v) for v in cols_at.values()) <= 40

    total = np.zeros(K)
    cov = bel.cov[None].copy()
    prev_inv = np.zeros(K, dtype=np.int64)
    code = np.zeros(K, dtype=np.int64)
    for t in range(1, L + 1):
        cols = cols_at[t]
        if compact:
            for b, col in enumerate(cols):
                code = code * 2 + masks[:, col]
            _, pid = np.unique(flat[:, :t].reshape(C, -1), axis=0, return_inverse=True)
            key = pid.ravel()[owner] * (1 << 40) + code
            _, rep, inv = np.unique(key, return_index=True, return_inverse=True)
            inv = inv.ravel()
        else:
            rep = inv = np.arange(K)
        cov = cov[prev_inv[rep]] + R_blocks
        mean = means[owner[rep], t - 1]
        for col in cols:
            on = masks[rep, col]
            if not on.any():
                continue
            _, i, j = edges[col]
            pj = anchors[j - n] if j >= n else mean[:, 2 * j : 2 * j + 2]
            diff = mean[:, 2 * i : 2 * i + 2] - pj
            dist = np.hypot(diff[:, 0], diff[:, 1])
            on = on & (dist >= EPS_DIST)
            unit = diff / np.where(on, dist, 1.0)[:, None]
            # H has +unit at i and -unit at j, so P H is a difference of block columns
            PH = np.einsum("kab,kb->ka", cov[:, :, 2 * i : 2 * i + 2], unit)
            if j < n:
                PH -= np.einsum("kab,kb->ka", cov[:, :, 2 * j : 2 * j + 2], unit)
                S = np.einsum("kb,kb->k", PH[:, 2 * i : 2 * i + 2] - PH[:, 2 * j : 2 * j + 2], unit)
            else:
                S = np.einsum("kb,kb->k", PH[:, 2 * i : 2 * i + 2], unit)
            S += noise.Q
            if np.any(S[on] <= 0):
                raise SingularInnovation("non-positive innovation variance in rollout")
            # rows without the edge get zero gain; forming PH_a PH_b first keeps exact symmetry
            gain = np.where(on, 1.0 / S, 0.0)
            cov = cov - (PH[:, :, None] * PH[:, None, :]) * gain[:, None, None]
        total += cost_fn(cov)[inv]
        prev_inv = inv
    return total


def rollout_costs(
    bel: JointBelief,
    controls,
    batch: TopologyBatch,
    noise: NoiseModel,
    cost_fn: CostFn,
    anchors=None,
) -> np.ndarray:
    """Accumulated cost of every topology in ``batch`` under one control sequence."""
    u = _as_controls(controls, bel.n_robots)
    owner = np.zeros(len(batch.weights), dtype=np.int64)
    return batched_rollout(bel, u[None], owner, batch.edges, batch.masks, noise, cost_fn, anchors)


def expected_cost(
    bel: JointBelief,
    controls,
    topologies: Sequence[WeightedTopology] | TopologyBatch,
    noise: NoiseModel,
    cost_fn: CostFn,
    anchors=None,
    edges: Sequence[Edge] | None = None,
) -> float:
    """Weighted sum over topologies of the rollout cost."""
    if isinstance(topologies, TopologyBatch):
        batch = topologies
    else:
        if edges is None:
            edges = sorted({e for t in topologies for e in t.active_edges})
        batch = TopologyBatch.from_topologies(edges, topologies)
    costs = rollout_costs(bel, controls, batch, noise, cost_fn, anchors)
    return float(np.dot(batch.weights, costs))
