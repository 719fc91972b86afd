import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xplain.errors import BadBandwidth, EmptyCandidates
from xplain.exemplar import (ProtodashExplainer, median_bandwidth, nonneg_quadratic,
                             protodash, protodash_from_kernel, prototype_objective,
                             qp_kkt_residual, rbf_kernel)

from oracles import best_weights_on_support, nnls_weights


def two_clusters(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(scale=0.1, size=(3, 2))
    b = rng.normal(scale=0.1, size=(3, 2)) + 5.0
    return np.vstack([a, b])


def test_identical_points():
    X = np.ones((4, 2))
    p = protodash(X, X, m=1)
    assert len(p.indices) == 1
    assert p.weights[0] == pytest.approx(1.0)
    assert p.objective == pytest.approx(0.5)


def test_two_clusters_match_exhaustive_pairs():
    X = two_clusters(0)
    p = protodash(X, X, m=2)
    assert sorted(i // 3 for i in p.indices) == [0, 1]
    sigma = median_bandwidth(X)
    K = rbf_kernel(X, X, sigma)
    mu = K.mean(axis=0)
    pair_scores = {pair: best_weights_on_support(K[np.ix_(pair, pair)], mu[list(pair)])
                   for pair in itertools.combinations(range(6), 2)}
    best_pair = max(pair_scores, key=pair_scores.get)
    assert sorted(i // 3 for i in best_pair) == [0, 1]
    # greedy may pick a different point inside a cluster, at a tiny cost
    assert pair_scores[best_pair] * 0.999 <= p.objective <= pair_scores[best_pair] + 1e-12


def test_instance_mode_sorted_by_weight():
    rng = np.random.default_rng(1)
    C = rng.normal(size=(15, 3))
    p = protodash(C[3] + 0.01, C, m=4)
    assert list(p.weights) == sorted(p.weights, reverse=True)
    assert p.indices[0] == 3


def test_errors():
    with pytest.raises(EmptyCandidates):
        protodash(np.zeros((1, 2)), np.zeros((0, 2)), m=1)
    with pytest.raises(BadBandwidth):
        protodash(np.zeros((1, 2)), np.ones((2, 2)), m=1, sigma=0.0)
    with pytest.raises(BadBandwidth):
        protodash(np.zeros((1, 2)), np.ones((2, 2)), m=1, sigma="wide")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 10), st.integers(1, 4))
def test_greedy_invariants(seed, n, m):
    rng = np.random.default_rng(seed)
    C = rng.normal(size=(n, 2))
    T = rng.normal(size=(3, 2))
    p = protodash(T, C, m=m)
    assert len(p.indices) == len(set(p.indices)) <= m
    assert np.all(p.weights >= 0)
    assert all(b >= a - 1e-12 for a, b in zip(p.objective_trace, p.objective_trace[1:]))
    assert prototype_objective(T, C, p) == pytest.approx(p.objective, abs=1e-9)
    # restricted QP is at its KKT point
    sel = np.array(p.indices)
    K = rbf_kernel(C, C, p.sigma)
    mu = rbf_kernel(T, C, p.sigma).mean(axis=0)
    assert qp_kkt_residual(K[np.ix_(sel, sel)], mu[sel], p.weights) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_kernel_scaling_keeps_selection(seed, scale):
    rng = np.random.default_rng(seed)
    C = rng.normal(size=(9, 2))
    K = rbf_kernel(C, C, 1.0)
    mu = K[:4].mean(axis=0)
    a = protodash_from_kernel(mu, K, 3).selected
    b = protodash_from_kernel(scale * mu, scale * K, 3).selected
    assert a == b


def test_nonneg_quadratic_against_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        A = rng.normal(size=(5, 5))
        K = A @ A.T + 1e-3 * np.eye(5)
        mu = rng.normal(size=5)
        w = nonneg_quadratic(K, mu)
        assert np.all(w >= 0)
        assert mu @ w - 0.5 * w @ K @ w == pytest.approx(best_weights_on_support(K, mu), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 12))
def test_nonneg_quadratic_matches_scipy_nnls(seed, k):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(k, 3))
    K = rbf_kernel(X, X, 1.0) + 1e-6 * np.eye(k)
    mu = K[:, rng.integers(0, k, 3)].mean(axis=1) + 0.1 * rng.normal(size=k)
    w = nonneg_quadratic(K, mu)
    ref = nnls_weights(K, mu)
    assert np.allclose(w, ref, atol=1e-6)


def test_explainer_summary_and_instance():
    X = two_clusters(3)
    ex = ProtodashExplainer(m=2).fit(X)
    e = ex.explain()
    assert e.kind == "prototype_set" and sorted(i // 3 for i in e.payload.indices) == [0, 1]
    one = ex.explain(X[4:5], m=1)
    assert one.payload.indices == [4]


def test_early_stop_fewer_than_m():
    X = np.zeros((3, 2))
    p = protodash(X, X, m=3)
    # after one prototype every gradient is zero
    assert len(p.indices) == 1
