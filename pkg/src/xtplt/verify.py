"""Randomized and fixture-driven checks of the consistency and regret results."""

from __future__ import annotations

import math
from importlib import resources

import numpy as np

from . import oracle
from .plt import brute_force_topk, path_products, topk_search
from .tree import (LabelTree, brute_force_min_cost_tree, build_complete, build_huffman, expected_cost,
                   multiclass_masses, tree_from_nested, union_masses)


def load_fixture(name: str) -> oracle.ExactDistribution:
    with resources.files("xtplt.fixtures").joinpath(name).open() as fh:
        return oracle.read_distribution(fh)


def proposition1() -> dict:
    dist = load_fixture("proposition1.dist")
    eta = oracle.marginals(dist)
    eta1 = oracle.pickone_map(dist)
    predicted = oracle.topk_labels(eta1, 1)
    regret = oracle.pk_regret(dist, predicted, 1)
    ok = (np.max(np.abs(eta - [0.6, 0.5, 0.4])) <= 1e-12
          and np.max(np.abs(eta1 - [0.35, 0.25, 0.40])) <= 1e-12
          and abs(regret - 0.2) <= 1e-12
          and not oracle.is_order_preserved(dist))
    return {"eta": eta.tolist(), "eta_pickone": eta1.tolist(), "predicted": predicted,
            "regret": regret, "passed": bool(ok)}


def random_tree(rng: np.random.Generator, m: int, max_depth: int | None = None, max_arity: int = 4) -> LabelTree:
    """Random tree over labels 0..m-1 with internal arity in [2, max_arity] and bounded depth."""
    labels = list(rng.permutation(m))

    def grow(items, depth):
        if len(items) == 1:
            return int(items[0])
        if max_depth is not None and depth >= max_depth - 1:
            return tuple(int(j) for j in items)
        k = int(rng.integers(2, min(max_arity, len(items)) + 1))
        cuts = sorted(rng.choice(np.arange(1, len(items)), size=k - 1, replace=False).tolist())
        parts = [items[a:b] for a, b in zip([0, *cuts], [*cuts, len(items)])]
        return tuple(grow(p, depth + 1) for p in parts)

    nested = grow(labels, 0)
    if not isinstance(nested, tuple):
        return LabelTree((-1,), ((),), (0,), 2)
    return tree_from_nested(nested)


def proposition2(trials: int = 1000, max_m: int = 6, seed: int = 1) -> dict:
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(trials):
        m = int(rng.integers(1, max_m + 1))
        if not oracle.is_order_preserved(oracle.make_independent(rng.uniform(size=m))):
            failures += 1
    return {"trials": trials, "failures": failures, "passed": failures == 0}


def theorem2(trials: int = 10_000, max_m: int = 10, seed: int = 2) -> dict:
    rng = np.random.default_rng(seed)
    failures, worst = 0, -math.inf
    for _ in range(trials):
        m = int(rng.integers(1, max_m + 1))
        k = int(rng.integers(1, m + 1))
        eta = rng.uniform(size=m)
        est = np.clip(eta + rng.normal(0, rng.uniform(0, 0.3), size=m), 0, 1)
        regret, bound, holds = oracle.theorem2_check(eta, est, k)
        worst = max(worst, regret - bound)
        failures += not holds
    return {"trials": trials, "failures": failures, "max_regret_minus_bound": worst, "passed": failures == 0}


def theorem1(trials: int = 1000, max_depth: int = 4, seed: int = 3, lam: float = 4.0) -> dict:
    rng = np.random.default_rng(seed)
    config = oracle.BoundConfig(lam)
    failures, checks = 0, 0
    for _ in range(trials):
        m = int(rng.integers(1, 17))
        tree = random_tree(rng, m, max_depth=max_depth)
        truths = rng.uniform(size=tree.num_nodes)
        if rng.uniform() < 0.5:
            estimates = rng.uniform(size=tree.num_nodes)
        else:
            estimates = np.clip(truths + rng.normal(0, 0.05, size=tree.num_nodes), 0, 1)
        for j in range(m):
            res = oracle.theorem1_check(tree, truths, estimates, j, config)
            checks += 1
            failures += not res.holds
    return {"trials": trials, "checks": checks, "failures": failures, "passed": failures == 0}


def huffman_multiclass(trials: int = 200, max_m: int = 7, seed: int = 4) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        m = int(rng.integers(2, max_m + 1))
        freqs = rng.dirichlet(np.ones(m) * rng.choice([0.3, 1.0, 3.0]))
        tree = build_huffman(freqs, 2)
        cost = expected_cost(tree, multiclass_masses(tree, freqs))
        _, best = brute_force_min_cost_tree(freqs, multiclass=True)
        worst = max(worst, abs(cost - best))
    return {"trials": trials, "max_abs_gap": worst, "passed": worst <= 1e-12}


def huffman_multilabel_counterexample() -> dict:
    dist = load_fixture("huffman_multilabel.dist")
    eta = oracle.marginals(dist)
    tree = build_huffman(eta, 2)
    cost = expected_cost(tree, union_masses(tree, dist.prob_any))
    _, best = brute_force_min_cost_tree(eta, multiclass=False, union_prob=dist.prob_any)
    return {"huffman_cost": cost, "optimal_cost": best, "passed": best < cost - 1e-12}


def ucs_exactness(trials: int = 1000, max_m: int = 64, seed: int = 5) -> dict:
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(trials):
        m = int(rng.integers(1, max_m + 1))
        tree = random_tree(rng, m, max_arity=int(rng.integers(2, 6))) if rng.uniform() < 0.7 \
            else build_complete(m, int(rng.integers(2, 5)))
        if rng.uniform() < 0.3:
            probs = rng.choice([0.0, 0.25, 0.5, 1.0], size=tree.num_nodes)
        else:
            probs = rng.uniform(size=tree.num_nodes)
        k = int(rng.integers(1, m + 1))
        got = topk_search(tree, lambda v: [probs[c] for c in tree.children[v]], probs[0], k)
        want = brute_force_topk(path_products(tree, probs), k)
        mismatches += got != want
    return {"trials": trials, "mismatches": mismatches, "passed": mismatches == 0}


SUITES = {
    "proposition1": proposition1,
    "proposition2": proposition2,
    "theorem1": theorem1,
    "theorem2": theorem2,
    "huffman": huffman_multiclass,
    "huffman-multilabel": huffman_multilabel_counterexample,
    "ucs": ucs_exactness,
}
