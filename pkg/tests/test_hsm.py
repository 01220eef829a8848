import math

import numpy as np
import pytest

from xtplt import oracle
from xtplt.data import Dataset, Example, SparseVector
from xtplt.hsm import (HsmModel, estimate_hsm, hsm_updates, pick_one_label, predict_scores_batch_hsm,
                       predict_topk_hsm, reduce_dataset, train_hsm, train_hsm_batch)
from xtplt.learner import LrSchedule, Representation
from xtplt.plt import PltModel, assign_update_sets, predict_topk, train_plt
from xtplt.synth import SynthConfig, gen_dependent, gen_multiclass
from xtplt.tree import build_complete, build_huffman, tree_from_nested
from xtplt.verify import random_tree

X = SparseVector.from_pairs([(0, 1.0)], 2)


def test_pick_one_expand_and_single():
    ex = Example(X, frozenset({2, 5}))
    copies = pick_one_label(ex, "expand")
    assert [(c.labels, c.weight) for c in copies] == [({2}, 0.5), ({5}, 0.5)]
    single = Example(X, frozenset({7}))
    for mode in ("expand", "sample"):
        (c,) = pick_one_label(single, mode, np.random.default_rng(0))
        assert c.labels == {7} and c.weight == 1.0


def test_pick_one_sample_is_uniform():
    ex = Example(X, frozenset({1, 4, 6}))
    rng = np.random.default_rng(0)
    draws = [next(iter(pick_one_label(ex, "sample", rng)[0].labels)) for _ in range(3000)]
    counts = np.bincount(draws, minlength=7)[[1, 4, 6]]
    assert np.all(np.abs(counts - 1000) < 4 * math.sqrt(3000 * (1 / 3) * (2 / 3)))


def test_empty_examples_skipped():
    ds = Dataset([Example(X, frozenset()), Example(X, frozenset({0, 1}))], 2, 2)
    reduced, skipped = reduce_dataset(ds, "expand")
    assert skipped == 1 and len(reduced) == 2
    assert pick_one_label(Example(X), "expand") == []


def test_expand_conserves_weight():
    data = gen_dependent(SynthConfig(d=3, m=8, n=300, seed=1))
    reduced, skipped = reduce_dataset(data, "expand")
    assert sum(ex.weight for ex in reduced) == pytest.approx(len(data) - skipped, abs=1e-9)


def test_updates_equal_plt_sets_without_root():
    rng = np.random.default_rng(0)
    for _ in range(200):
        m = int(rng.integers(1, 20))
        t = random_tree(rng, m)
        j = int(rng.integers(m))
        pos, neg = assign_update_sets(t, {j})
        plt_updates = sorted([(v, 1, 1.0) for v in pos if v != 0] + [(v, 0, 1.0) for v in neg])
        assert hsm_updates(t, j, 1.0) == plt_updates


def test_expand_two_leaf_trace():
    t = build_complete(2, 2)
    ds = Dataset([Example(X, frozenset({0, 1}))], 2, 2)
    model = HsmModel.create(t, Representation("sparse", 2))
    train_hsm(model, ds, "expand", 1, LrSchedule.constant(1.0))
    for v in (1, 2):
        # one positive and one negative half-weight step each
        assert model.nodes[v].t == 2 and model.nodes[v].seen_negative
    assert model.nodes[0] is None


def test_empty_dataset_unchanged():
    model = HsmModel.create(build_complete(3, 2), Representation("sparse", 2))
    train_hsm(model, Dataset([], 2, 3), "sample", 2)
    assert all(n.t == 0 for n in model.nodes[1:])


def set_probs(model, probs):
    for v, p in probs.items():
        model.nodes[v].bias = math.log(p / (1 - p))


def test_sibling_renormalization():
    t = build_complete(2, 2)
    model = HsmModel.create(t, Representation("sparse", 2))
    set_probs(model, {1: 0.6, 2: 0.6})
    assert [s for _, s in predict_topk_hsm(model, X, 2)] == pytest.approx([0.5, 0.5], abs=1e-12)


def test_chain_scores_one():
    t = build_complete(1, 2)
    model = HsmModel.create(t, Representation("sparse", 2))
    assert predict_topk_hsm(model, X, 1) == [(0, 1.0)]


def test_injected_pickone_marginals_predict_label_two():
    t = tree_from_nested((0, 1, 2))
    model = HsmModel.create(t, Representation("sparse", 2))
    eta1 = oracle.pickone_map(oracle.PROPOSITION1)
    set_probs(model, {t.leaf_of_label[j]: eta1[j] for j in range(3)})
    (top,) = predict_topk_hsm(model, X, 1)
    assert top[0] == 2 and top[1] == pytest.approx(0.40, abs=1e-12)


def test_leaf_scores_sum_to_one():
    rng = np.random.default_rng(3)
    for _ in range(50):
        m = int(rng.integers(1, 40))
        t = random_tree(rng, m)
        model = HsmModel.create(t, Representation("sparse", 3))
        for node in model.nodes[1:]:
            node.set_weights(rng.normal(size=3) * 3, bias=float(rng.normal()))
        x = SparseVector.from_dense(rng.normal(size=3))
        scores = predict_topk_hsm(model, x, m)
        assert sum(s for _, s in scores) == pytest.approx(1.0, abs=1e-9)
        for j, s in scores:
            assert estimate_hsm(model, x, j) == pytest.approx(s, rel=1e-12)


def test_multiclass_reduction_online():
    data = gen_multiclass(SynthConfig(d=3, m=16, n=3000, seed=5))
    train, test = data.split(2000)
    tree = build_complete(16, 2, train.label_frequencies())
    plt_model = PltModel.create(tree, Representation("sparse", 3))
    hsm_model = HsmModel.create(tree, Representation("sparse", 3))
    sched = LrSchedule("linear", 0.5)
    train_plt(plt_model, train, 2, sched, 1e-4, shuffle_seed=3)
    train_hsm(hsm_model, train, "sample", 2, sched, 1e-4, seed=0, shuffle_seed=3)
    assert plt_model.nodes[0].constant_positive
    for ex in test:
        assert predict_topk(plt_model, ex.features, 1)[0][0] == predict_topk_hsm(hsm_model, ex.features, 1)[0][0]


def test_batch_hsm_matches_online_ranking_shape():
    data = gen_dependent(SynthConfig(d=3, m=8, n=800, seed=2))
    tree = build_huffman(data.label_frequencies() + 1e-9, 2)
    model = train_hsm_batch(HsmModel.create(tree, Representation("sparse", 3)), data, 1e-4)
    S = predict_scores_batch_hsm(model, data.feature_matrix())
    np.testing.assert_allclose(S.sum(axis=1), 1.0, atol=1e-12)
    for i in range(0, 800, 100):
        for j, s in predict_topk_hsm(model, data[i].features, 8):
            assert S[i, j] == pytest.approx(s, rel=1e-10)


def test_dimension_mismatch():
    model = HsmModel.create(build_complete(2, 2), Representation("sparse", 3))
    with pytest.raises(ValueError):
        train_hsm(model, Dataset([], 2, 2))
