"""Probabilistic label trees: incremental training and exact top-k search."""

from __future__ import annotations

import heapq
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .data import Dataset, SparseVector
from .learner import LrSchedule, NodeModel, Representation, fit_batch, predict_prob, sigmoid_array, update
from .tree import LabelTree, label_to_path

log = logging.getLogger(__name__)

# (node id, binary target, example weight)
NodeUpdate = tuple[int, int, float]


@dataclass
class PltModel:
    tree: LabelTree
    nodes: list[NodeModel | None]
    representation: Representation
    renormalize: bool = False
    stats: dict = field(default_factory=dict)

    @classmethod
    def create(cls, tree: LabelTree, representation: Representation, **kw) -> "PltModel":
        return cls(tree, [NodeModel(representation.dim) for _ in range(tree.num_nodes)], representation, **kw)

    def check_dataset(self, dataset: Dataset) -> None:
        if dataset.num_features != self.representation.num_features:
            raise ValueError(f"dataset has {dataset.num_features} features, model expects "
                             f"{self.representation.num_features}")
        if dataset.num_labels != self.tree.num_labels:
            raise ValueError(f"dataset has {dataset.num_labels} labels, tree has {self.tree.num_labels}")


def assign_update_sets(tree: LabelTree, labels: Iterable[int]) -> tuple[list[int], list[int]]:
    """Nodes updated positively and negatively for one example, both sorted."""
    labels = set(labels)
    if not labels:
        return [], [0]
    positive: set[int] = set()
    for j in labels:
        positive.update(label_to_path(tree, j))
    negative = {c for v in positive for c in tree.children[v]} - positive
    return sorted(positive), sorted(negative)


def run_online(nodes: Sequence[NodeModel | None], representation: Representation,
               stream: Callable[[int], list[tuple[SparseVector, list[NodeUpdate]]]],
               epochs: int, schedule: LrSchedule, l2: float, threads: int = 1) -> dict:
    """Shared SGD loop: ``stream(epoch)`` yields (input, node updates) pairs.

    The linear schedule advances once per processed item across all epochs;
    the inverse-power schedule uses each node's own update count. Embedding
    gradients are summed over an item's node updates and applied once.
    """
    dense = representation.kind == "dense"
    step = 0
    n_updates = 0

    def process(items, start_step):
        nonlocal n_updates
        s = start_step
        for x, ups in items:
            v = representation.transform(x)
            eta_global = schedule.rate(s if schedule.kind == "linear" else s + 1)
            grad = np.zeros(representation.dim) if dense else None
            for node_id, target, weight in ups:
                node = nodes[node_id]
                eta = eta_global if schedule.kind == "linear" else schedule.rate(node.t + 1)
                g = update(node, v, target, weight, eta, l2, input_grad=dense)
                if dense:
                    grad += g
            n_updates += len(ups)
            if dense and ups:
                representation.backprop(x, grad, eta_global)
            s += 1

    for epoch in range(epochs):
        items = stream(epoch)
        if schedule.kind == "linear" and schedule.total_updates == 0:
            schedule = LrSchedule("linear", schedule.eta0, schedule.power, max(1, epochs * len(items)))
        if threads <= 1 or len(items) < threads:
            process(items, step)
        else:
            shard = -(-len(items) // threads)
            with ThreadPoolExecutor(threads) as pool:
                list(pool.map(lambda r: process(items[r * shard:(r + 1) * shard], step + r * shard),
                              range(threads)))
        step += len(items)
    return {"items": step, "node_updates": n_updates}


def finalize_nodes(nodes: Sequence[NodeModel | None]) -> int:
    """Mark nodes trained on positives only as constant; fold weight scales."""
    n_const = 0
    for node in nodes:
        if node is None:
            continue
        if node.t > 0 and not node.seen_negative:
            node.constant_positive = True
            n_const += 1
        node.fold_scale()
    return n_const


def train_plt(model: PltModel, dataset: Dataset, epochs: int = 1, schedule: LrSchedule | None = None,
              l2: float = 0.0, threads: int = 1, shuffle_seed: int | None = None) -> PltModel:
    """Incremental PLT learning, one positive/negative node set per example."""
    model.check_dataset(dataset)
    schedule = schedule or LrSchedule.constant(0.1)
    tree = model.tree
    base = [(ex.features, [(v, 1, ex.weight) for v in pos] + [(v, 0, ex.weight) for v in neg])
            for ex in dataset.examples
            for pos, neg in [assign_update_sets(tree, ex.labels)]]
    rng = np.random.default_rng(shuffle_seed) if shuffle_seed is not None else None

    def stream(epoch):
        if rng is None:
            return base
        return [base[i] for i in rng.permutation(len(base))]

    stats = run_online(model.nodes, model.representation, stream, epochs, schedule, l2, threads) if base else {}
    stats["constant_nodes"] = finalize_nodes(model.nodes)
    model.stats.update(stats)
    log.info("plt training: %s", stats)
    return model


def plt_node_data(tree: LabelTree, Y: np.ndarray):
    """Per-node (row mask, targets) for batch PLT learning from a label matrix."""
    A = tree.subtree_matrix()
    Z = (Y.astype(np.int64) @ A.astype(np.int64)) > 0
    for v in range(tree.num_nodes):
        rows = np.ones(Y.shape[0], dtype=bool) if v == 0 else Z[:, tree.parent[v]]
        yield v, rows, Z[rows, v]


def fit_nodes_batch(nodes, node_data, X: np.ndarray, l2: float) -> None:
    for v, rows, targets, weights in node_data:
        node = nodes[v]
        if weights.sum() <= 0:
            continue
        neg = weights[targets == 0].sum()
        node.t = int(np.count_nonzero(weights))
        node.seen_negative = bool(neg > 0)
        if neg <= 0:
            node.constant_positive = True
            continue
        w, b = fit_batch(X[rows], targets.astype(float), weights, l2)
        node.set_weights(w, b)


def train_plt_batch(model: PltModel, dataset: Dataset, l2: float = 1e-4) -> PltModel:
    """Fit every node classifier to convergence on its own filtered data set.

    Requires the sparse (pass-through) representation; features are densified.
    """
    model.check_dataset(dataset)
    if model.representation.kind != "sparse":
        raise ValueError("batch training supports the sparse representation only")
    X = dataset.feature_matrix()
    W = np.array([ex.weight for ex in dataset.examples])
    data = ((v, rows, t, W[rows]) for v, rows, t in plt_node_data(model.tree, dataset.label_matrix()))
    fit_nodes_batch(model.nodes, data, X, l2)
    model.stats["constant_nodes"] = sum(1 for n in model.nodes if n is not None and n.constant_positive)
    return model


def renormalize_siblings(estimates: Sequence[float]) -> list[float]:
    """Scale sibling estimates up to sum 1 when they fall short of it."""
    total = float(sum(estimates))
    if 0 < total < 1:
        return [e / total for e in estimates]
    return [float(e) for e in estimates]


def topk_search(tree: LabelTree, children_probs: Callable[[int], Sequence[float]],
                root_score: float, k: int) -> list[tuple[int, float]]:
    """Uniform-cost search for the k leaves with the largest path products.

    Path products never increase going down, so leaves leave the queue in
    non-increasing score order. After the k-th leaf the search drains every
    entry tying its score so the (score desc, label asc) rule is exact.
    """
    if not 1 <= k <= tree.num_labels:
        raise ValueError(f"k must lie in [1, {tree.num_labels}]")
    heap = [(-root_score, 0)]
    found: list[tuple[int, float]] = []
    kth = None
    while heap:
        neg, v = heapq.heappop(heap)
        score = -neg
        if kth is not None and score < kth:
            break
        ch = tree.children[v]
        if not ch:
            found.append((tree.node_label[v], score))
            if len(found) == k:
                kth = score
            continue
        for c, p in zip(ch, children_probs(v)):
            heapq.heappush(heap, (-(score * p), c))
    found.sort(key=lambda t: (-t[1], t[0]))
    return found[:k]


def brute_force_topk(scores: Sequence[float], k: int) -> list[tuple[int, float]]:
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
    return [(j, float(scores[j])) for j in order[:k]]


def path_products(tree: LabelTree, node_prob: Sequence[float], root_score: float | None = None) -> list[float]:
    """Score of every label as the product of node probabilities along its path, root first."""
    out = []
    for j in range(tree.num_labels):
        path = label_to_path(tree, j)
        s = node_prob[0] if root_score is None else root_score
        for v in path[1:]:
            s *= node_prob[v]
        out.append(s)
    return out


def _node_probs_fn(model: PltModel, x: SparseVector):
    v = model.representation.transform(x)
    nodes = model.nodes
    renorm = model.renormalize

    def children_probs(u):
        probs = [predict_prob(nodes[c], v) for c in model.tree.children[u]]
        return renormalize_siblings(probs) if renorm else probs

    return v, children_probs


def estimate_marginal(model: PltModel, x: SparseVector, label: int) -> float:
    """Product of node probabilities along the label's path, root factor included."""
    v, children_probs = _node_probs_fn(model, x)
    path = label_to_path(model.tree, label)
    s = predict_prob(model.nodes[0], v)
    for parent, child in zip(path, path[1:]):
        s *= children_probs(parent)[model.tree.children[parent].index(child)]
    return s


def predict_topk(model: PltModel, x: SparseVector, k: int) -> list[tuple[int, float]]:
    v, children_probs = _node_probs_fn(model, x)
    return topk_search(model.tree, children_probs, predict_prob(model.nodes[0], v), k)


def node_prob_matrix(nodes: Sequence[NodeModel | None], X: np.ndarray) -> np.ndarray:
    """Probabilities of every node for every row of a dense input matrix."""
    n = X.shape[0]
    P = np.ones((n, len(nodes)))
    for v, node in enumerate(nodes):
        if node is None or node.constant_positive:
            continue
        P[:, v] = sigmoid_array(X @ node.weights + node.bias)
    return P


def label_score_matrix(tree: LabelTree, P: np.ndarray, root_score: float | None = None,
                       renormalize: bool = False) -> np.ndarray:
    """n x m path-product scores from an n x nodes probability matrix."""
    P = P.copy()
    if renormalize:
        for v in range(tree.num_nodes):
            ch = list(tree.children[v])
            if ch:
                total = P[:, ch].sum(axis=1, keepdims=True)
                scale = np.where((total > 0) & (total < 1), total, 1.0)
                P[:, ch] = P[:, ch] / scale
    S = np.empty_like(P)
    S[:, 0] = P[:, 0] if root_score is None else root_score
    for v in range(1, tree.num_nodes):
        S[:, v] = S[:, tree.parent[v]] * P[:, v]
    return S[:, list(tree.leaf_of_label)]


def predict_scores_batch(model: PltModel, X: np.ndarray) -> np.ndarray:
    if model.representation.kind != "sparse":
        raise ValueError("batch scoring supports the sparse representation only")
    return label_score_matrix(model.tree, node_prob_matrix(model.nodes, X), renormalize=model.renormalize)


def top1_from_scores(S: np.ndarray) -> np.ndarray:
    """Column of the largest score per row; ties resolve to the smaller label."""
    return np.argmax(S, axis=1)
