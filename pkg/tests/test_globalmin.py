import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from layerscat.forward import LayerConfig
from layerscat.globalmin import (MslmParams, MslmState, cluster_heads, critical_distance,
                                 mslm_iterate, mslm_run, reduced_random_search,
                                 reduced_size, sample_batch, stopping)
from layerscat.localmin import SearchSpace
from layerscat.objective import (AdmissibleSet, ObjectiveSpec, ProbeSet, epsilon_err, phi,
                                 synthesize)

from oracles import D1_INDEX, D1_RADIUS

SPACE = SearchSpace()


def test_params_validation():
    with pytest.raises(ValueError):
        MslmParams(gamma=0.0)
    with pytest.raises(ValueError):
        MslmParams(L=0)
    with pytest.raises(ValueError):
        MslmParams(sigma=-1.0)


def test_critical_distance_oracle():
    d1 = critical_distance(1, MslmParams(), SPACE)
    assert d1 == pytest.approx(math.hypot(D1_RADIUS, D1_INDEX), rel=1e-12)
    # radius part alone, via a unit-width index range
    narrow = SearchSpace(AdmissibleSet(n_low=1.0, n_high=4.0))
    assert critical_distance(1, MslmParams(), narrow) == pytest.approx(
        math.sqrt(2) * D1_RADIUS, rel=1e-12)


def test_critical_distance_monotone_and_limits():
    p = MslmParams()
    d = [critical_distance(j, p, SPACE) for j in range(1, 102)]
    assert all(b < a for a, b in zip(d, d[1:])) and d[-1] > 0
    assert critical_distance(3, MslmParams(sigma=1e-12), SPACE) < 1e-2
    with pytest.raises(ValueError):
        critical_distance(1, MslmParams(L=1), SPACE)


def test_stopping_examples():
    w_tot, stop = stopping(5000, 150, 0.03)
    assert abs(w_tot - 155) < 0.5 and not stop
    assert w_tot == pytest.approx(150 * 4999 / 4848)
    assert stopping(10, 0, 0.03) == (0.0, True)
    assert stopping(5, 3, 0.03) == (math.inf, False)
    assert stopping(1000, 10, 0.03)[1]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 5000), st.integers(0, 5000))
def test_stopping_properties(K, W):
    w_tot, stop = stopping(K, W, 0.03)
    if K <= W + 2:
        assert w_tot == math.inf and not stop
    else:
        assert w_tot >= W


def test_sample_batch_feasible():
    rng = np.random.default_rng(0)
    pts = sample_batch(rng, 500, SPACE)
    assert pts.shape == (500, 8)
    assert np.all(np.diff(pts[:, :4], axis=1) >= 0)
    assert np.all((pts[:, :4] >= 0) & (pts[:, :4] <= 1))
    assert np.all((pts[:, 4:] >= SPACE.s_low) & (pts[:, 4:] <= SPACE.s_high))
    # marginal of the smallest of 4 uniforms has mean 1/5
    big = sample_batch(np.random.default_rng(1), 20000, SPACE)
    assert big[:, 0].mean() == pytest.approx(0.2, abs=0.01)


def test_reduced_size():
    assert reduced_size(200, 0.01) == 2
    assert reduced_size(15000, 0.01) == 150
    assert reduced_size(50, 0.01) == 1


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 40), st.floats(0.0, 3.0))
def test_cluster_heads_brute_force(seed, count, d):
    pts = np.random.default_rng(seed).uniform(0, 2, size=(count, 3))
    expect = [i for i in range(count)
              if not any(np.linalg.norm(pts[k] - pts[i]) <= d for k in range(i))]
    assert cluster_heads(pts, d) == expect


def test_cluster_pair():
    pts = np.array([[0.0, 0.0], [0.01, 0.0], [5.0, 5.0]])
    assert cluster_heads(pts, 0.1) == [0, 2]


@pytest.fixture(scope="module")
def one_layer_tight():
    """One-layer truth with a one-layer admissible set and narrow index range."""
    truth = LayerConfig((0.55,), (2.25,))
    adm = AdmissibleSet(n_low=1.0, n_high=4.0, M=1)
    spec = ObjectiveSpec(synthesize(truth, ProbeSet.uniform()), adm)
    return truth, spec, SearchSpace(adm)


def test_single_basin_run(one_layer_tight):
    truth, spec, space = one_layer_tight
    out = mslm_run(spec, MslmParams(L=50, max_iterations=6, seed=3), space)
    # dense grid oracle over (r1, s1)
    r = np.linspace(0.01, 1.0, 100)
    s = np.linspace(1.0, 2.0, 101)
    vals = np.array([[phi(LayerConfig((a,), (b * b,)), spec) for b in s] for a in r])
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    assert abs(r[i] - 0.55) < 0.011 and abs(s[j] - 1.5) < 0.011
    assert epsilon_err(out.best.config, truth) < 0.01
    best = out.best.config
    assert abs(best.radii[0] - r[i]) < 0.011 and abs(math.sqrt(best.indices[0]) - s[j]) < 0.011


def test_state_contracts(one_layer_tight):
    _, spec, space = one_layer_tight
    params = MslmParams(L=40, seed=5)
    state = MslmState.initial(space, params.seed)
    for _ in range(4):
        mslm_iterate(state, spec, params, space)
        n = state.samples.shape[0]
        assert state.reduced.size == reduced_size(n, params.gamma)
        order = np.argsort(state.values, kind="stable")
        assert np.array_equal(state.reduced, order[:state.reduced.size])
        assert state.K >= state.W == len(state.minima)
        # clustering soundness on the reduced sample
        pts = state.samples[state.reduced]
        heads = cluster_heads(pts, state.d_j)
        assert state.launched == [int(state.reduced[h]) for h in heads]
    best = min(m.phi_value for m in state.minima)
    assert best == min(state.records[-1].best_phi, best)
    vecs = [space.to_vector(m.config) for m in state.minima]
    for a in range(len(vecs)):
        for b in range(a):
            if vecs[a].size == vecs[b].size:
                assert (np.linalg.norm(vecs[a] - vecs[b]) >= 1e-3
                        or abs(state.minima[a].phi_value - state.minima[b].phi_value) > 0)


def test_tiny_batch_runs_one_search(one_layer_tight):
    _, spec, space = one_layer_tight
    params = MslmParams(L=5, seed=0)
    state = mslm_iterate(MslmState.initial(space, 0), spec, params, space)
    assert state.reduced.size == 1 and state.K == 1 and state.local_searches == 1


def test_determinism(one_layer_tight):
    _, spec, space = one_layer_tight
    a = mslm_run(spec, MslmParams(L=30, max_iterations=3, seed=9), space)
    b = mslm_run(spec, MslmParams(L=30, max_iterations=3, seed=9), space)
    assert a.best.config == b.best.config and a.K == b.K and a.W == b.W
    assert [r.__dict__ for r in a.records] == [r.__dict__ for r in b.records]
    assert a.best.phi_value == pytest.approx(phi(a.best.config, spec), abs=1e-12)


def test_rrs_equals_unclustered_single_iteration(one_layer_tight):
    _, spec, space = one_layer_tight
    params = MslmParams(L=300, gamma=0.01, seed=4, clustering=False, max_iterations=1)
    m = mslm_run(spec, params, space)
    r = reduced_random_search(spec, 300, 0.01, seed=4, space=space)
    assert m.K == r.K and m.W == r.W
    assert [x.config for x in m.minima] == [x.config for x in r.minima]


def test_rrs_degenerate_and_repeatable(one_layer_tight):
    _, spec, space = one_layer_tight
    r = reduced_random_search(spec, 20, 0.01, seed=1, space=space)
    assert r.K == 1 and r.local_searches == 1
    again = reduced_random_search(spec, 20, 0.01, seed=1, space=space)
    assert again.best.config == r.best.config
    with pytest.raises(ValueError):
        reduced_random_search(spec, 0)


def test_budget_returns_unconverged(one_layer_tight):
    _, spec, space = one_layer_tight
    out = mslm_run(spec, MslmParams(L=30, max_iterations=50, seed=2, budget_seconds=0.0),
                   space)
    assert out.iterations == 1 and not out.converged
