import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xtplt.data import SparseVector
from xtplt.learner import (LrSchedule, NodeModel, Representation, backprop_embedding, fit_batch, gradient_check,
                           logistic_loss, predict_prob, sigmoid, update)


def test_predict_prob_values():
    node = NodeModel(2)
    assert predict_prob(node, np.zeros(2)) == 0.5
    node.bias = math.log(3)
    assert predict_prob(node, np.zeros(2)) == pytest.approx(0.75, abs=1e-15)
    node.constant_positive = True
    assert predict_prob(node, np.array([5.0, -3.0])) == 1.0


def test_predict_prob_dimension_mismatch():
    with pytest.raises(ValueError):
        predict_prob(NodeModel(2), np.zeros(3))
    with pytest.raises(ValueError):
        predict_prob(NodeModel(2), SparseVector.from_pairs([(0, 1.0)], 3))


def test_single_update_from_zero():
    node = NodeModel(2)
    g = update(node, np.array([1.0, 0.0]), 1, 1.0, eta=1.0, l2=0.0)
    np.testing.assert_array_equal(node.weights, [0.5, 0.0])
    assert node.bias == 0.5
    assert node.t == 1
    np.testing.assert_array_equal(g, [0.0, 0.0])  # pre-update weights were zero


def test_sparse_and_dense_updates_agree():
    a, b = NodeModel(3), NodeModel(3)
    x = SparseVector.from_pairs([(0, 0.5), (2, -1.0)], 3)
    for target in (1, 0, 1):
        ga = update(a, x, target, 0.7, 0.3, 0.05)
        gb = update(b, x.to_dense(), target, 0.7, 0.3, 0.05)
        np.testing.assert_allclose(ga, gb, rtol=1e-14)
    np.testing.assert_allclose(a.weights, b.weights, rtol=1e-14)
    assert a.bias == pytest.approx(b.bias, rel=1e-14)


def test_l2_only_shrinks():
    node = NodeModel(2)
    node.set_weights(np.array([1.0, -2.0]), bias=0.0)
    # zero input: the data gradient touches only the bias
    update(node, np.zeros(2), 1, 1.0, eta=1.0, l2=0.1)
    np.testing.assert_allclose(node.weights, [0.9, -1.8], rtol=1e-15)
    assert node.bias == 0.5


def test_update_gradient_vanishes_far_from_boundary():
    node = NodeModel(1)
    node.bias = -50.0
    update(node, np.array([1.0]), 0, 1.0, 1.0)
    assert abs(node.bias + 50.0) < 1e-20
    assert abs(node.weights[0]) < 1e-20


def test_constant_node_ignores_updates():
    node = NodeModel(2, constant_positive=True)
    g = update(node, np.ones(2), 0, 1.0, 1.0)
    assert node.t == 0 and not np.any(g) and not np.any(node.weights)


def test_returned_input_gradient_uses_old_weights():
    node = NodeModel(2)
    node.set_weights(np.array([0.2, -0.4]), bias=0.1)
    v = np.array([1.0, 2.0])
    expected = 2.0 * (sigmoid(0.2 - 0.8 + 0.1) - 1) * np.array([0.2, -0.4])
    np.testing.assert_allclose(update(node, v, 1, 2.0, 0.5, 0.01), expected, rtol=1e-14)


def test_logistic_loss_stable():
    assert logistic_loss(0.0, 1) == pytest.approx(math.log(2))
    assert logistic_loss(800.0, 1) == pytest.approx(0.0, abs=1e-300)
    assert logistic_loss(-800.0, 1) == pytest.approx(800.0)
    assert math.isfinite(logistic_loss(800.0, 0))


def test_schedules():
    lin = LrSchedule("linear", 0.5, total_updates=10)
    assert lin.rate(0) == 0.5 and lin.rate(5) == 0.25 and lin.rate(10) == 0.0 and lin.rate(20) == 0.0
    inv = LrSchedule("inverse-power", 0.5, 0.5)
    rates = [inv.rate(t) for t in range(1, 200)]
    assert rates[0] == 0.5 and rates[3] == 0.25
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    with pytest.raises(ValueError):
        inv.rate(0)
    with pytest.raises(ValueError):
        LrSchedule("cosine")
    with pytest.raises(ValueError):
        LrSchedule("linear", 0.1).rate(0)


@given(eta=st.floats(1e-4, 10), p=st.floats(0, 2), t=st.integers(1, 10 ** 6))
def test_inverse_power_monotone(eta, p, t):
    s = LrSchedule("inverse-power", eta, p)
    assert s.rate(t + 1) <= s.rate(t)


def random_node(rng, dim):
    node = NodeModel(dim)
    node.set_weights(rng.normal(size=dim), bias=float(rng.normal()))
    return node


def test_gradient_check_random_draws():
    rng = np.random.default_rng(0)
    worst = max(gradient_check(random_node(rng, 5), rng.normal(size=5), int(rng.integers(2)), 1e-5)
                for _ in range(100))
    assert worst < 1e-4


def test_gradient_check_zero_input_and_saturation():
    rng = np.random.default_rng(1)
    node = random_node(rng, 3)
    assert gradient_check(node, np.zeros(3), 1) < 1e-4
    node.set_weights(np.full(3, 20.0), bias=20.0)
    assert gradient_check(node, np.ones(3), 1) < 1e-8
    with pytest.raises(ValueError):
        gradient_check(node, np.ones(3), 1, h=0.1)


def test_dense_representation_average():
    E = np.arange(12, dtype=float).reshape(4, 3)
    rep = Representation("dense", 4, 3, "uniform", E.copy())
    x = SparseVector.from_pairs([(0, 1.0), (2, 3.0)], 4)
    np.testing.assert_allclose(rep.transform(x), (E[0] + E[2]) / 2)
    tf = Representation("dense", 4, 3, "tfidf", E.copy())
    np.testing.assert_allclose(tf.transform(x), (E[0] + 3 * E[2]) / 4)
    assert not np.any(rep.transform(SparseVector.from_pairs([], 4)))


def test_sparse_representation_passthrough():
    rep = Representation("sparse", 5)
    x = SparseVector.from_pairs([(1, 2.0)], 5)
    assert rep.transform(x) is x and rep.dim == 5
    with pytest.raises(ValueError):
        rep.transform(SparseVector.from_pairs([(1, 2.0)], 6))
    with pytest.raises(ValueError):
        rep.backprop(x, np.zeros(5), 0.1)


def test_backprop_rules():
    E = np.ones((3, 2))
    rep = Representation("dense", 3, 2, "uniform", E.copy())
    x1 = SparseVector.from_pairs([(1, 1.0)], 3)
    backprop_embedding(rep, x1, np.zeros(2), 0.5)
    np.testing.assert_array_equal(rep.embedding, E)
    grad = np.array([1.0, -2.0])
    backprop_embedding(rep, x1, grad, 0.5)
    np.testing.assert_allclose(rep.embedding[1], E[1] - 0.5 * grad)
    rep2 = Representation("dense", 3, 2, "uniform", E.copy())
    backprop_embedding(rep2, SparseVector.from_pairs([(0, 1.0), (2, 1.0)], 3), grad, 0.5)
    np.testing.assert_allclose(rep2.embedding[0], E[0] - 0.25 * grad)
    np.testing.assert_allclose(rep2.embedding[2], E[2] - 0.25 * grad)


def test_embedding_init_range():
    rep = Representation.dense_random(50, 8, rng=np.random.default_rng(0))
    assert np.all(np.abs(rep.embedding) <= 1 / 8)


def test_identical_streams_are_bit_identical():
    def run():
        rng = np.random.default_rng(5)
        node = NodeModel(4)
        for _ in range(200):
            update(node, rng.normal(size=4), int(rng.integers(2)), 1.0, 0.1, 0.0)
        return node.weights.tobytes(), node.bias

    assert run() == run()


def test_fit_batch_matches_scipy_optimum():
    from scipy.optimize import minimize

    rng = np.random.default_rng(2)
    X = rng.normal(size=(200, 3))
    y = (X @ [1.0, -2.0, 0.5] + rng.normal(size=200) > 0).astype(float)
    wts = rng.uniform(0.5, 1.5, size=200)
    w, b = fit_batch(X, y, wts, l2=1e-2)

    def obj(th):
        a = X @ th[:3] + th[3]
        return (wts @ (np.logaddexp(0, a) - y * a)) / wts.sum() + 0.005 * th[:3] @ th[:3]

    ref = minimize(obj, np.zeros(4), method="BFGS", options={"gtol": 1e-10}).x
    np.testing.assert_allclose(np.append(w, b), ref, atol=1e-5)
