"""Hierarchical softmax over a label tree and the pick-one-label reduction.

Each non-root node holds a binary classifier for "the label lies below me";
sibling estimates are normalized to sum to one at prediction time, so the
node models are the same objects the PLT uses.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Example, SparseVector
from .learner import LrSchedule, NodeModel, Representation, predict_prob
from .plt import (fit_nodes_batch, finalize_nodes, label_score_matrix, node_prob_matrix, run_online,
                  topk_search)
from .tree import LabelTree, label_to_path

log = logging.getLogger(__name__)


@dataclass
class HsmModel:
    tree: LabelTree
    nodes: list[NodeModel | None]  # nodes[0] is None: the root has no classifier
    representation: Representation
    stats: dict = field(default_factory=dict)

    @classmethod
    def create(cls, tree: LabelTree, representation: Representation) -> "HsmModel":
        nodes = [None] + [NodeModel(representation.dim) for _ in range(1, tree.num_nodes)]
        return cls(tree, nodes, representation)

    def check_dataset(self, dataset: Dataset) -> None:
        if dataset.num_features != self.representation.num_features:
            raise ValueError(f"dataset has {dataset.num_features} features, model expects "
                             f"{self.representation.num_features}")
        if dataset.num_labels != self.tree.num_labels:
            raise ValueError(f"dataset has {dataset.num_labels} labels, tree has {self.tree.num_labels}")


def pick_one_label(example: Example, mode: str = "sample", rng: np.random.Generator | None = None) -> list[Example]:
    """Reduce a multi-label example to multiclass copies.

    ``sample`` draws one label uniformly (weight kept); ``expand`` emits one
    copy per label with weight 1/s. Empty label sets give no copies.
    """
    labels = sorted(example.labels)
    if not labels:
        return []
    if mode == "expand":
        w = example.weight / len(labels)
        return [Example(example.features, frozenset({j}), w) for j in labels]
    if mode == "sample":
        if len(labels) == 1:
            return [example]
        if rng is None:
            raise ValueError("sample mode needs a random generator")
        return [Example(example.features, frozenset({labels[int(rng.integers(len(labels)))]}), example.weight)]
    raise ValueError(f"unknown pick-one-label mode {mode!r}")


def reduce_dataset(dataset: Dataset, mode: str = "expand", rng: np.random.Generator | None = None) -> tuple[Dataset, int]:
    """Apply the pick-one-label reduction to a whole dataset; returns (reduced, skipped)."""
    out, skipped = [], 0
    for ex in dataset.examples:
        copies = pick_one_label(ex, mode, rng)
        if not copies:
            skipped += 1
        out.extend(copies)
    return Dataset(out, dataset.num_features, dataset.num_labels, dataset.source), skipped


def hsm_updates(tree: LabelTree, label: int, weight: float) -> list[tuple[int, int, float]]:
    """Path nodes below the root get target 1, their siblings target 0; sorted by node id."""
    path = label_to_path(tree, label)
    ups = []
    for parent, child in zip(path, path[1:]):
        for c in tree.children[parent]:
            ups.append((c, 1 if c == child else 0, weight))
    return sorted(ups)


def train_hsm(model: HsmModel, dataset: Dataset, mode: str = "sample", epochs: int = 1,
              schedule: LrSchedule | None = None, l2: float = 0.0, seed: int = 0,
              threads: int = 1, shuffle_seed: int | None = None) -> HsmModel:
    """Online HSM training on the pick-one-label reduction of ``dataset``.

    In sample mode a fresh label is drawn per example and epoch.
    """
    model.check_dataset(dataset)
    schedule = schedule or LrSchedule.constant(0.1)
    tree = model.tree
    rng = np.random.default_rng(seed)
    order_rng = np.random.default_rng(shuffle_seed) if shuffle_seed is not None else None
    skipped = sum(1 for ex in dataset.examples if not ex.labels)

    def stream(epoch):
        items = []
        examples = dataset.examples
        if order_rng is not None:
            examples = [examples[i] for i in order_rng.permutation(len(examples))]
        for ex in examples:
            for copy in pick_one_label(ex, mode, rng):
                (j,) = copy.labels
                items.append((copy.features, hsm_updates(tree, j, copy.weight)))
        return items

    stats = run_online(model.nodes, model.representation, stream, epochs, schedule, l2, threads) \
        if len(dataset) > skipped else {}
    stats["skipped_empty"] = skipped
    stats["constant_nodes"] = finalize_nodes(model.nodes)
    model.stats.update(stats)
    log.info("hsm training: %s", stats)
    return model


def hsm_node_data(tree: LabelTree, Y: np.ndarray, weights: np.ndarray):
    """Per-node batch data under the expand reduction.

    Copies of one example that pass through the parent are merged into at most
    one positive row (weight = share of labels below the node) and one
    negative row (share of labels below the parent but not the node).
    """
    A = tree.subtree_matrix().astype(np.float64)
    counts = Y.astype(np.float64) @ A
    s = Y.sum(axis=1).astype(np.float64)
    share = np.divide(weights, s, out=np.zeros_like(weights, dtype=float), where=s > 0)
    for v in range(1, tree.num_nodes):
        pos_w = counts[:, v] * share
        neg_w = (counts[:, tree.parent[v]] - counts[:, v]) * share
        pos_rows = np.flatnonzero(pos_w > 0)
        neg_rows = np.flatnonzero(neg_w > 0)
        rows = np.concatenate([pos_rows, neg_rows])
        targets = np.concatenate([np.ones(pos_rows.size), np.zeros(neg_rows.size)])
        yield v, rows, targets, np.concatenate([pos_w[pos_rows], neg_w[neg_rows]])


def train_hsm_batch(model: HsmModel, dataset: Dataset, l2: float = 1e-4) -> HsmModel:
    """Fit each node to convergence on the expand-mode (weight 1/s) reduction."""
    model.check_dataset(dataset)
    if model.representation.kind != "sparse":
        raise ValueError("batch training supports the sparse representation only")
    X = dataset.feature_matrix()
    W = np.array([ex.weight for ex in dataset.examples])
    fit_nodes_batch(model.nodes, hsm_node_data(model.tree, dataset.label_matrix(), W), X, l2)
    model.stats["skipped_empty"] = sum(1 for ex in dataset.examples if not ex.labels)
    return model


def normalize_siblings(probs) -> list[float]:
    total = float(sum(probs))
    if total <= 0:
        return [1.0 / len(probs)] * len(probs)
    return [p / total for p in probs]


def _children_probs(model: HsmModel, x: SparseVector):
    v = model.representation.transform(x)

    def children_probs(u):
        return normalize_siblings([predict_prob(model.nodes[c], v) for c in model.tree.children[u]])

    return children_probs


def predict_topk_hsm(model: HsmModel, x: SparseVector, k: int) -> list[tuple[int, float]]:
    return topk_search(model.tree, _children_probs(model, x), 1.0, k)


def estimate_hsm(model: HsmModel, x: SparseVector, label: int) -> float:
    children_probs = _children_probs(model, x)
    path = label_to_path(model.tree, label)
    s = 1.0
    for parent, child in zip(path, path[1:]):
        s *= children_probs(parent)[model.tree.children[parent].index(child)]
    return s


def hsm_score_matrix(tree: LabelTree, P: np.ndarray) -> np.ndarray:
    """n x m leaf distribution from raw per-node probabilities (siblings normalized)."""
    P = P.copy()
    for v in range(tree.num_nodes):
        ch = list(tree.children[v])
        if ch:
            total = P[:, ch].sum(axis=1, keepdims=True)
            safe = np.where(total > 0, total, 1.0)
            P[:, ch] = np.where(total > 0, P[:, ch] / safe, 1.0 / len(ch))
    return label_score_matrix(tree, P, root_score=1.0)


def predict_scores_batch_hsm(model: HsmModel, X: np.ndarray) -> np.ndarray:
    if model.representation.kind != "sparse":
        raise ValueError("batch scoring supports the sparse representation only")
    return hsm_score_matrix(model.tree, node_prob_matrix(model.nodes, X))
