"""Leader guidance and the two follower planners: one-step exhaustive search
over joint follower actions and multi-step search over heading sequences."""
from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .baselines import SamplerConfig
from .belief import JointBelief, NoiseModel, node_pairs
from .series import DEFAULT_DELTA_F, Method
from .topology import (
    EXHAUSTIVE_CAP,
    PRUNE_EPS,
    CostFn,
    ProbabilityCache,
    batched_rollout,
    block_trace,
    all_outcomes,
    masks_from_probabilities,
    pruned_probabilities,
    weighted_traces,
)

_DENSE_OUTCOMES = 4096

FOUR_ACTIONS = ((0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0))


def heading_set(step: float, n_headings: int = 8, stay: bool = True) -> list[np.ndarray]:
    """Stay (optional) followed by ``n_headings`` compass moves of length ``step``."""
    out = [np.zeros(2)] if stay else []
    for k in range(n_headings):
        a = 2.0 * math.pi * k / n_headings
        out.append(step * np.array([round(math.cos(a), 15), round(math.sin(a), 15)]))
    return out


@dataclass(frozen=True)
class ActionSpace:
    actions: tuple  # per follower, a tuple of 2-vectors
    max_step: tuple  # per follower

    def __post_init__(self):
        acts = tuple(tuple(np.asarray(a, dtype=float) for a in per) for per in self.actions)
        object.__setattr__(self, "actions", acts)
        for per, cap in zip(acts, self.max_step):
            for a in per:
                if float(np.hypot(*a)) > cap + 1e-12:
                    raise ValueError(f"action {a} exceeds max step {cap}")

    @classmethod
    def shared(cls, actions: Sequence, n_followers: int, max_step: float | None = None) -> "ActionSpace":
        acts = tuple(np.asarray(a, dtype=float) for a in actions)
        cap = max(float(np.hypot(*a)) for a in acts) if max_step is None else max_step
        return cls(tuple(acts for _ in range(n_followers)), tuple(cap for _ in range(n_followers)))


@dataclass(frozen=True)
class PlanResult:
    chosen_controls: np.ndarray  # (L, N, 2), leader included
    expected_cost: float
    candidates_evaluated: int
    candidate_index: int = 0


def leader_guidance(est_pos, waypoint, u_max: float) -> np.ndarray:
    delta = np.asarray(waypoint, dtype=float) - np.asarray(est_pos, dtype=float)
    dist = float(np.hypot(delta[0], delta[1]))
    if dist == 0.0:
        raise ValueError("estimate coincides with the waypoint")
    return delta * (min(u_max, dist) / dist)


@dataclass
class PlanContext:
    """Settings shared by every planning call of a trial."""

    noise: NoiseModel
    method: Method
    delta_f: float = DEFAULT_DELTA_F
    anchors: np.ndarray | None = None
    sampler: SamplerConfig | None = None
    prune_eps: float = PRUNE_EPS
    cap: int = EXHAUSTIVE_CAP

    def __post_init__(self):
        self.method = Method(self.method)
        self.anchors = np.zeros((0, 2)) if self.anchors is None else np.asarray(self.anchors, float).reshape(-1, 2)


def edge_probability_table(
    bel: JointBelief, candidates: np.ndarray, ctx: PlanContext, cache: ProbabilityCache | None = None
) -> tuple[list, np.ndarray]:
    """Probabilities of every candidate edge for every control sequence.

    ``candidates`` has shape ``(C, L, N, 2)``. Returns the edge list
    ``(t, i, j)`` and a ``(C, E)`` array; identical relative displacements
    are evaluated once.
    """
    C, L, n = candidates.shape[:3]
    cache = cache or ProbabilityCache(ctx.method, ctx.noise.rho, ctx.delta_f, ctx.sampler)
    pairs = node_pairs(n, len(ctx.anchors))
    cov = bel.cov.copy()
    means = bel.mean[None, None, :] + np.cumsum(candidates.reshape(C, L, 2 * n), axis=1)
    edges, cols = [], []
    for t in range(1, L + 1):
        for i in range(n):
            cov[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] += ctx.noise.R
        for i, j in pairs:
            si = slice(2 * i, 2 * i + 2)
            if j < n:
                sj = slice(2 * j, 2 * j + 2)
                rel_cov = cov[si, si] + cov[sj, sj] - cov[si, sj] - cov[sj, si]
                rel = means[:, t - 1, si] - means[:, t - 1, sj]
            else:
                rel_cov = cov[si, si]
                rel = means[:, t - 1, si] - ctx.anchors[j - n]
            _, first, inverse = np.unique(np.round(rel, 9) + 0.0, axis=0, return_index=True, return_inverse=True)
            vals = cache.many(rel[first], rel_cov)
            edges.append((t, i, j))
            cols.append(np.clip(vals[inverse.ravel()], 0.0, 1.0))
    return edges, np.stack(cols, axis=1)


def candidate_costs(
    bel: JointBelief,
    candidates: np.ndarray,
    ctx: PlanContext,
    cost_fn: CostFn,
    cache: ProbabilityCache | None = None,
) -> np.ndarray:
    """Expected cost of each control sequence, all rollouts in one batch."""
    candidates = np.asarray(candidates, dtype=float)
    C = candidates.shape[0]
    edges, probs = edge_probability_table(bel, candidates, ctx, cache)
    E = len(edges)
    if 2**E <= min(ctx.cap, _DENSE_OUTCOMES):
        # every candidate is enumerated exhaustively: weight all outcomes at once
        outcomes = all_outcomes(E)
        p = pruned_probabilities(probs, ctx.prune_eps)
        w = np.prod(np.where(outcomes[None, :, :], p[:, None, :], 1.0 - p[:, None, :]), axis=2)
        owner, row = np.nonzero(w)
        masks, weights = outcomes[row], w[owner, row]
    else:
        masks, weights, owner = [], [], []
        for c in range(C):
            m, wc = masks_from_probabilities(probs[c], ctx.prune_eps, ctx.cap, rng=np.random.default_rng(c))
            masks.append(m)
            weights.append(wc)
            owner.append(np.full(len(wc), c))
        masks = np.concatenate(masks)
        weights = np.concatenate(weights)
        owner = np.concatenate(owner)
    costs = batched_rollout(bel, candidates, owner, edges, masks, ctx.noise, cost_fn, ctx.anchors)
    return np.bincount(owner, weights=weights * costs, minlength=C)


def _pick(candidates: np.ndarray, costs: np.ndarray) -> PlanResult:
    # first index attaining the minimum keeps the lexicographic tie-break
    best = int(np.argmin(costs))
    return PlanResult(candidates[best].copy(), float(costs[best]), len(candidates), best)


def osmdp_candidates(leader_control, follower_actions: ActionSpace) -> np.ndarray:
    lead = np.asarray(leader_control, dtype=float)
    combos = list(itertools.product(*follower_actions.actions))
    out = np.empty((len(combos), 1, 1 + len(follower_actions.actions), 2))
    out[:, 0, 0] = lead
    for c, combo in enumerate(combos):
        out[c, 0, 1:] = np.asarray(combo)
    return out


def osmdp_plan(
    bel: JointBelief,
    leader_control,
    follower_actions: ActionSpace,
    noise: NoiseModel,
    method: Method | str,
    delta_f: float = DEFAULT_DELTA_F,
    ctx: PlanContext | None = None,
    leader: int = 0,
) -> PlanResult:
    """Best joint follower action for one step, scored by the leader's trace."""
    ctx = ctx or PlanContext(noise, Method(method), delta_f)
    cands = osmdp_candidates(leader_control, follower_actions)
    return _pick(cands, candidate_costs(bel, cands, ctx, block_trace(leader)))


def gbs_candidates(leader_controls, follower_candidates: Sequence, horizon: int | None = None) -> np.ndarray:
    lead = np.asarray(leader_controls, dtype=float).reshape(-1, 2)
    L = len(lead) if horizon is None else horizon
    seqs = list(itertools.product(range(len(follower_candidates)), repeat=L))
    acts = np.asarray(follower_candidates, dtype=float)
    out = np.empty((len(seqs), L, 2, 2))
    out[:, :, 0] = lead[:L]
    out[:, :, 1] = acts[np.array(seqs)]
    return out


def gbs_plan(
    bel: JointBelief,
    leader_controls,
    follower_candidates: Sequence,
    noise: NoiseModel,
    method: Method | str,
    delta_f: float = DEFAULT_DELTA_F,
    weights: tuple[float, float] = (9.0, 1.0),
    ctx: PlanContext | None = None,
) -> PlanResult:
    """Best follower heading sequence over the horizon; robot 0 leads, robot 1 follows."""
    ctx = ctx or PlanContext(noise, Method(method), delta_f)
    cands = gbs_candidates(leader_controls, follower_candidates)
    cost = weighted_traces({0: weights[0], 1: weights[1]})
    return _pick(cands, candidate_costs(bel, cands, ctx, cost))
