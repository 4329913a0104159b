import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from connprob.baselines import oracle
from connprob.belief import EdgeObservation, JointBelief, NoiseModel, ekf_predict, ekf_update
from connprob.gaussian import Gaussian2
from connprob.planners import PlanContext, candidate_costs
from connprob.topology import (
    EdgeProbabilitySet,
    ProbabilityCache,
    TopologyBatch,
    WeightedTopology,
    block_trace,
    enumerate_topologies,
    expected_cost,
    masks_from_probabilities,
    predict_edge_probabilities,
    weighted_traces,
)

NOISE = NoiseModel(np.diag([0.04, 0.04]), 0.01, 3.0)
ANCHOR = np.array([[0.0, 0.0]])


def gbs_belief():
    return JointBelief(np.array([6.0, 0.0, 3.0, 2.0]), 0.1 * np.eye(4))


def naive_cost(bel, controls, topo, noise, cost_fn, anchors):
    """Per-topology rollout through the filter with range = predicted distance."""
    n = bel.n_robots
    total, cur = 0.0, bel
    for t, u in enumerate(np.asarray(controls).reshape(-1, n, 2), start=1):
        cur = ekf_predict(cur, u, noise)
        obs = []
        for (s, i, j) in sorted(topo.active_edges):
            if s != t:
                continue
            pi = cur.mean[2 * i : 2 * i + 2]
            pj = anchors[j - n] if j >= n else cur.mean[2 * j : 2 * j + 2]
            obs.append(EdgeObservation(i, j, float(np.hypot(*(pi - pj))), t))
        cur = ekf_update(cur, obs, anchors, noise)
        total += float(cost_fn(cur.cov[None])[0])
    return total


def probs(ps, t=1):
    pairs = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3)]
    return EdgeProbabilitySet([(t, i, j, p) for (i, j), p in zip(pairs, ps)], "apse")


def test_probability_set_validation():
    with pytest.raises(ValueError):
        EdgeProbabilitySet([(1, 0, 1, 1.5)], "apse")


def test_deterministic_probabilities_give_one_topology():
    topos = enumerate_topologies(probs([1.0, 0.0, 1.0]))
    assert len(topos) == 1
    assert topos[0].weight == 1.0
    assert topos[0].active_edges == {(1, 0, 1), (1, 1, 2)}


def test_two_half_edges():
    topos = enumerate_topologies(probs([0.5, 0.5]))
    assert len(topos) == 4
    assert all(t.weight == 0.25 for t in topos)


def test_three_edges_match_brute_force():
    p = [0.9, 0.5, 0.1]
    topos = enumerate_topologies(probs(p), prune_eps=0.0)
    assert len(topos) == 8
    edges = probs(p).edges
    got = {t.active_edges: t.weight for t in topos}
    for bits in itertools.product((0, 1), repeat=3):
        w = np.prod([pi if b else 1 - pi for pi, b in zip(p, bits)])
        key = frozenset(e for e, b in zip(edges, bits) if b)
        assert got[key] == pytest.approx(w, abs=1e-15)


@given(st.lists(st.floats(0.0, 1.0), min_size=0, max_size=10))
def test_exhaustive_weights_sum_to_one(p):
    _, w = masks_from_probabilities(np.array(p))
    assert abs(w.sum() - 1.0) < 1e-9


def test_sampled_mode_when_over_cap():
    p = np.full(14, 0.5)
    masks, w = masks_from_probabilities(p, cap=64, draws=512, rng=np.random.default_rng(3))
    assert len(masks) <= 512
    assert w.sum() == pytest.approx(1.0)
    assert len({tuple(m) for m in masks}) == len(masks)
    freq = w @ masks
    assert np.all(np.abs(freq - 0.5) < 0.1)


def test_invalid_prune_eps():
    with pytest.raises(ValueError):
        masks_from_probabilities(np.array([0.5]), prune_eps=0.5)


def test_far_anchor_edge_is_zero_and_coincident_pair_is_one():
    bel = JointBelief(np.array([50.0, 0.0, 50.0, 0.0]), 0.1 * np.eye(4))
    eps = predict_edge_probabilities(bel, np.zeros((1, 2, 2)), NOISE, "apse", anchors=ANCHOR)
    p = dict(zip(eps.edges, eps.probabilities))
    assert p[(1, 0, 2)] == 0.0 and p[(1, 1, 2)] == 0.0
    assert p[(1, 0, 1)] == 1.0


def test_gbs_follower_anchor_edge():
    bel = gbs_belief()
    got = {}
    for m in ("bernoulli", "apse"):
        eps = predict_edge_probabilities(bel, np.zeros((1, 2, 2)), NOISE, m, anchors=ANCHOR)
        got[m] = dict(zip(eps.edges, eps.probabilities))[(1, 1, 2)]
    assert got["bernoulli"] == 0.0
    assert 0.0 < got["apse"] < 0.5
    # follower covariance 0.1 + 0.04 per axis after one predict
    truth = oracle(Gaussian2(np.array([3.0, 2.0]), 0.14 * np.eye(2)), 3.0, seed=1).value
    assert got["apse"] == pytest.approx(truth, abs=3e-3)


def test_probability_cache_memoizes():
    cache = ProbabilityCache("apse", 3.0, 1e-10)
    d = Gaussian2(np.array([1.0, 2.0]), np.eye(2))
    a = cache(d)
    assert cache(d) == a and len(cache.table) == 1


def test_empty_topology_cost_is_pure_prediction():
    bel = gbs_belief()
    cost = expected_cost(bel, np.zeros((2, 2, 2)), [WeightedTopology(frozenset(), 1.0)], NOISE, block_trace(0))
    assert cost == pytest.approx((0.2 + 0.08) + (0.2 + 0.16))


def test_equal_weights_average():
    bel = gbs_belief()
    ta = WeightedTopology(frozenset(), 1.0)
    tb = WeightedTopology(frozenset({(1, 0, 1)}), 1.0)
    u = np.zeros((1, 2, 2))
    a = expected_cost(bel, u, [ta], NOISE, block_trace(0), edges=[(1, 0, 1)])
    b = expected_cost(bel, u, [tb], NOISE, block_trace(0))
    mixed = expected_cost(bel, u, [WeightedTopology(ta.active_edges, 0.5), WeightedTopology(tb.active_edges, 0.5)], NOISE, block_trace(0))
    assert mixed == pytest.approx((a + b) / 2, rel=1e-14)


def _gbs_setup():
    bel = gbs_belief()
    controls = np.array([[[0.0, 0.5], [-0.5, -0.5]], [[0.0, 0.5], [-0.5, 0.0]], [[0.0, 0.5], [0.0, -0.7]]])
    return bel, controls


def test_gbs_rollout_matches_independent_filter_loop():
    bel, controls = _gbs_setup()
    eps = predict_edge_probabilities(bel, controls, NOISE, "apse", anchors=ANCHOR)
    topos = enumerate_topologies(eps)
    assert abs(sum(t.weight for t in topos) - 1) < 1e-9
    cost_fn = weighted_traces({0: 9.0, 1: 1.0})
    fast = expected_cost(bel, controls, topos, NOISE, cost_fn, ANCHOR, edges=eps.edges)
    slow = sum(t.weight * naive_cost(bel, controls, t, NOISE, cost_fn, ANCHOR) for t in topos)
    assert fast == pytest.approx(slow, rel=1e-12)


def test_step_one_eight_topologies():
    bel = gbs_belief()
    u = np.array([[[0.0, 0.5], [-0.7, -0.7]]])
    p = np.array([0.7, 0.4, 0.2])
    eps = EdgeProbabilitySet([(1, 0, 1, p[0]), (1, 0, 2, p[1]), (1, 1, 2, p[2])], "apse")
    topos = enumerate_topologies(eps)
    assert len(topos) == 8
    cost_fn = weighted_traces({0: 9.0, 1: 1.0})
    fast = expected_cost(bel, u, topos, NOISE, cost_fn, ANCHOR, edges=eps.edges)
    slow = sum(t.weight * naive_cost(bel, u, t, NOISE, cost_fn, ANCHOR) for t in topos)
    assert fast == pytest.approx(slow, rel=1e-12)


@pytest.mark.parametrize("method", ["apse", "bernoulli", "linear"])
def test_planner_fast_path_matches_per_candidate_expectation(method):
    bel, _ = _gbs_setup()
    rng = np.random.default_rng(4)
    cands = rng.uniform(-0.5, 0.5, size=(6, 3, 2, 2))
    ctx = PlanContext(NOISE, method, anchors=ANCHOR)
    cost_fn = weighted_traces({0: 9.0, 1: 1.0})
    fast = candidate_costs(bel, cands, ctx, cost_fn)
    for c in range(len(cands)):
        eps = predict_edge_probabilities(bel, cands[c], NOISE, method, anchors=ANCHOR)
        topos = enumerate_topologies(eps)
        slow = sum(t.weight * naive_cost(bel, cands[c], t, NOISE, cost_fn, ANCHOR) for t in topos)
        assert fast[c] == pytest.approx(slow, rel=1e-10)


def test_bernoulli_family_is_singleton():
    bel, controls = _gbs_setup()
    eps = predict_edge_probabilities(bel, controls, NOISE, "bernoulli", anchors=ANCHOR)
    assert len(enumerate_topologies(eps)) == 1


@given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3), st.integers(0, 2))
def test_certain_edge_never_increases_cost(p, extra):
    bel, controls = _gbs_setup()
    eps = EdgeProbabilitySet([(2, 0, 1, p[0]), (2, 0, 2, p[1]), (2, 1, 2, p[2])], "apse")
    edges = eps.edges
    topos = enumerate_topologies(eps, prune_eps=0.0)
    added = (1, *[(0, 1), (0, 2), (1, 2)][extra])
    more = [WeightedTopology(t.active_edges | {added}, t.weight) for t in topos]
    cost_fn = block_trace(0)
    base = expected_cost(bel, controls, topos, NOISE, cost_fn, ANCHOR, edges=edges + [added])
    with_edge = expected_cost(bel, controls, more, NOISE, cost_fn, ANCHOR, edges=edges + [added])
    assert with_edge <= base + 1e-12


def test_batch_roundtrip():
    topos = [WeightedTopology(frozenset({(1, 0, 1)}), 0.3), WeightedTopology(frozenset(), 0.7)]
    batch = TopologyBatch.from_topologies([(1, 0, 1)], topos)
    assert batch.topologies() == topos
