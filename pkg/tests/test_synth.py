import json
import math

import numpy as np
import pytest

from xtplt.synth import (SynthConfig, dependent_labels, gen_dependent, gen_independent, gen_multiclass,
                         independent_labels, label_cardinality_stats, mixing_matrix, multiclass_labels,
                         sample_geometry, softmax_probs)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(d=0)
    with pytest.raises(ValueError):
        SynthConfig(c=0.0)
    assert json.loads(SynthConfig(seed=3).to_json())["seed"] == 3


def test_geometry():
    W, X = sample_geometry(SynthConfig(d=3, m=50, n=100_000, seed=1))
    np.testing.assert_allclose(np.linalg.norm(W, axis=1), 1.0, atol=1e-12)
    assert np.all(np.linalg.norm(X, axis=1) <= 1.0 + 1e-15)
    assert np.all(np.abs(X.mean(axis=0)) < 0.02)
    # uniform in the ball: P(|x| <= 1/2) = 1/8
    assert abs(np.mean(np.linalg.norm(X, axis=1) <= 0.5) - 0.125) < 0.005


def test_softmax_value():
    P = softmax_probs(np.array([[1.0, 0.0]]), np.array([[1.0, 0.0], [0.0, 1.0]]), 10.0)
    assert P[0, 0] == pytest.approx(math.exp(10) / (math.exp(10) + 1), abs=1e-12)
    assert P[0, 0] == pytest.approx(0.9999546, abs=1e-7)


def test_multiclass_one_label_each_and_small_c_uniform():
    data = gen_multiclass(SynthConfig(d=3, m=4, n=20_000, c=1e-9, seed=2))
    assert all(len(ex.labels) == 1 for ex in data)
    counts = data.label_frequencies()
    sigma = math.sqrt(20_000 * 0.25 * 0.75)
    assert np.all(np.abs(counts - 5000) < 3 * sigma)


def test_independent_matches_sigmoid_curve():
    cfg = SynthConfig(d=3, m=1, n=100_000, seed=4)
    W, X = sample_geometry(cfg)
    data = gen_independent(cfg)
    y = data.label_matrix()[:, 0]
    a = X @ W[0]
    edges = np.linspace(-1, 1, 9)
    for lo, hi in zip(edges, edges[1:]):
        sel = (a >= lo) & (a < hi)
        if sel.sum() < 500:
            continue
        p = np.mean(1 / (1 + np.exp(-a[sel])))
        band = 3 * math.sqrt(p * (1 - p) / sel.sum()) + 0.005
        assert abs(y[sel].mean() - p) < band


def test_independent_zero_score_and_no_conditional_covariance():
    W = np.array([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]])
    x = np.tile([0.3, -0.2], (50_000, 1))
    Y = independent_labels(x, W, np.random.default_rng(0)).astype(float)
    cov = np.cov(Y.T)
    assert np.all(np.abs(cov[np.triu_indices(3, 1)]) < 4 / math.sqrt(50_000))
    at_zero = independent_labels(np.zeros((40_000, 2)), W[:1], np.random.default_rng(1))
    assert abs(at_zero.mean() - 0.5) < 3 * 0.5 / math.sqrt(40_000)


def test_dependent_identity_without_noise():
    cfg = SynthConfig(d=3, m=6, n=500, seed=5)
    W, X = sample_geometry(cfg)
    data = gen_dependent(cfg, mixing=np.eye(6), noise=False)
    np.testing.assert_array_equal(data.label_matrix(), (X @ W.T) > 0)


def test_dependent_origin_gives_no_labels():
    W = np.eye(3)
    Y = dependent_labels(np.zeros((4, 3)), W, np.random.default_rng(0).uniform(-1, 1, (3, 3)), np.zeros((4, 3)))
    assert not Y.any()


def test_dependent_labels_are_correlated_at_fixed_x():
    cfg = SynthConfig(d=3, m=8, n=1, seed=6)
    W, _ = sample_geometry(cfg)
    M = mixing_matrix(cfg)
    n = 20_000
    x = np.tile([0.1, 0.2, -0.1], (n, 1))
    eps = np.random.default_rng(0).normal(0, 0.5, size=(n, 8))
    Y = dependent_labels(x, W, M, eps).astype(float)
    cov = np.cov(Y.T)[np.triu_indices(8, 1)]
    assert np.max(np.abs(cov)) > 10 / math.sqrt(n)


def test_determinism_and_seed_sensitivity():
    cfg = SynthConfig(d=3, m=5, n=200, seed=9)
    for gen in (gen_multiclass, gen_independent, gen_dependent):
        a, b = gen(cfg), gen(cfg)
        np.testing.assert_array_equal(a.feature_matrix(), b.feature_matrix())
        np.testing.assert_array_equal(a.label_matrix(), b.label_matrix())
    W1, _ = sample_geometry(cfg)
    W2, _ = sample_geometry(SynthConfig(d=3, m=5, n=200, seed=10))
    assert not np.allclose(W1, W2)


def test_cardinality_stats_count_empty():
    data = gen_independent(SynthConfig(d=3, m=2, n=2000, seed=1))
    stats = label_cardinality_stats(data)
    assert stats["examples"] == 2000 and stats["empty"] == sum(1 for ex in data if not ex.labels)
    assert stats["empty"] > 0


def test_multiclass_labels_helper_one_hot():
    Y = multiclass_labels(np.zeros((10, 2)), np.eye(2), 1.0, np.random.default_rng(0))
    np.testing.assert_array_equal(Y.sum(axis=1), 1)
