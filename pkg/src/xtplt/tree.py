"""Label trees: construction, label/path mapping and expected training cost.

Nodes are numbered 0..n-1 with the root at 0 and every parent numbered
before its children (breadth-first order). Each leaf holds exactly one label.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .data import Dataset, SparseVector

TREE_FORMAT_VERSION = 1


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class LabelTree:
    parent: tuple[int, ...]
    children: tuple[tuple[int, ...], ...]
    node_label: tuple[int, ...]  # -1 for internal nodes
    arity: int = 2

    def __post_init__(self):
        n = len(self.parent)
        if n == 0 or len(self.children) != n or len(self.node_label) != n:
            raise TreeError("inconsistent node tables")
        if self.parent[0] != -1 or any(p == -1 for p in self.parent[1:]):
            raise TreeError("node 0 must be the only root")
        for v in range(1, n):
            if not 0 <= self.parent[v] < v:
                raise TreeError(f"node {v} must have a parent numbered below it")
        for v, ch in enumerate(self.children):
            if any(self.parent[c] != v for c in ch):
                raise TreeError(f"child table of node {v} disagrees with parents")
            if self.node_label[v] >= 0 and ch:
                raise TreeError(f"labelled node {v} has children")
            if self.node_label[v] < 0 and len(ch) < 2:
                raise TreeError(f"internal node {v} has fewer than 2 children")
        if sum(len(c) for c in self.children) != n - 1:
            raise TreeError("child tables do not cover all non-root nodes")
        labels = sorted(j for j in self.node_label if j >= 0)
        if labels != list(range(len(labels))):
            raise TreeError("leaf labels must be a permutation of 0..m-1")
        leaf_of = [0] * len(labels)
        for v, j in enumerate(self.node_label):
            if j >= 0:
                leaf_of[j] = v
        object.__setattr__(self, "_leaf_of", tuple(leaf_of))
        depth = [0] * n
        for v in range(1, n):
            depth[v] = depth[self.parent[v]] + 1
        object.__setattr__(self, "_depth", tuple(depth))

    @property
    def num_nodes(self) -> int:
        return len(self.parent)

    @property
    def num_labels(self) -> int:
        return len(self._leaf_of)

    @property
    def leaf_of_label(self) -> tuple[int, ...]:
        return self._leaf_of

    @property
    def depth(self) -> tuple[int, ...]:
        return self._depth

    def is_leaf(self, v: int) -> bool:
        return not self.children[v]

    def leaves(self) -> list[int]:
        return [v for v in range(self.num_nodes) if not self.children[v]]

    def subtree_labels(self) -> list[frozenset[int]]:
        out: list[set[int]] = [set() for _ in range(self.num_nodes)]
        for v in range(self.num_nodes - 1, -1, -1):
            if self.node_label[v] >= 0:
                out[v].add(self.node_label[v])
            if v:
                out[self.parent[v]] |= out[v]
        return [frozenset(s) for s in out]

    def subtree_matrix(self) -> np.ndarray:
        """Boolean m x n matrix: entry (j, v) is set when label j lies below node v."""
        A = np.zeros((self.num_labels, self.num_nodes), dtype=bool)
        for j in range(self.num_labels):
            for v in label_to_path(self, j):
                A[j, v] = True
        return A

    def code_lengths(self) -> list[int]:
        return [self._depth[self._leaf_of[j]] for j in range(self.num_labels)]


def _from_children(children: Sequence[Sequence[int]], node_label: Sequence[int], arity: int) -> LabelTree:
    """Renumber an arbitrary rooted tree (root = 0) into breadth-first order."""
    order = [0]
    for v in order:
        order.extend(children[v])
    new_id = {old: new for new, old in enumerate(order)}
    n = len(order)
    parent = [-1] * n
    new_children: list[tuple[int, ...]] = [()] * n
    labels = [-1] * n
    for old in order:
        v = new_id[old]
        new_children[v] = tuple(new_id[c] for c in children[old])
        for c in new_children[v]:
            parent[c] = v
        labels[v] = node_label[old]
    return LabelTree(tuple(parent), tuple(new_children), tuple(labels), arity)


def _label_order(m: int, frequencies: Sequence[float] | None) -> list[int]:
    if frequencies is None:
        return list(range(m))
    if len(frequencies) != m:
        raise TreeError("need one frequency per label")
    return sorted(range(m), key=lambda j: (-frequencies[j], j))


def build_complete(m: int, b: int = 2, frequencies: Sequence[float] | None = None) -> LabelTree:
    """Complete b-ary tree of minimal height in heap layout.

    Leaves are filled shallowest-first with labels sorted by decreasing
    frequency (ties and the no-frequency case by label id).
    """
    if m < 1 or b < 2:
        raise TreeError("need m >= 1 and b >= 2")
    n_internal = -(-(m - 1) // (b - 1))
    n = m + n_internal
    children = [tuple(c for c in range(b * v + 1, b * v + b + 1) if c < n) if v < n_internal else ()
                for v in range(n)]
    node_label = [-1] * n
    for leaf, j in zip(range(n_internal, n), _label_order(m, frequencies)):
        node_label[leaf] = j
    return _from_children(children, node_label, b)


def build_huffman(frequencies: Sequence[float], b: int = 2) -> LabelTree:
    """b-ary Huffman tree; zero-weight dummies pad the alphabet when needed.

    Ties are broken by (weight, lowest contained symbol id); dummies carry
    negative ids so they merge first and are then dropped.
    """
    m = len(frequencies)
    if m < 1 or b < 2:
        raise TreeError("need at least one label and b >= 2")
    freqs = [float(f) for f in frequencies]
    if any(f < 0 for f in freqs) or not any(f > 0 for f in freqs):
        raise TreeError("frequencies must be non-negative with at least one positive")
    if m == 1:
        return LabelTree((-1,), ((),), (0,), b)
    n_dummy = (-(m - 1)) % (b - 1)
    # node records: children list and label (-1 internal, -2 dummy)
    kids: list[list[int]] = []
    labels: list[int] = []
    heap = []
    for j, f in enumerate(freqs):
        kids.append([])
        labels.append(j)
        heap.append((f, j, len(kids) - 1))
    for t in range(n_dummy):
        kids.append([])
        labels.append(-2)
        heap.append((0.0, -1 - t, len(kids) - 1))
    heapq.heapify(heap)
    while len(heap) > 1:
        group = [heapq.heappop(heap) for _ in range(min(b, len(heap)))]
        kids.append([g[2] for g in group])
        labels.append(-1)
        heapq.heappush(heap, (sum(g[0] for g in group), min(g[1] for g in group), len(kids) - 1))
    root = heap[0][2]
    # drop dummies and rebase so the root is node 0
    keep_kids = {v: [c for c in kids[v] if labels[c] != -2] for v in range(len(kids))}
    order = [root]
    for v in order:
        order.extend(keep_kids[v])
    idx = {old: i for i, old in enumerate(order)}
    children = [[idx[c] for c in keep_kids[old]] for old in order]
    node_label = [labels[old] for old in order]
    return _from_children(children, node_label, b)


@dataclass(frozen=True)
class LabelProfile:
    label: int
    profile: SparseVector


def label_profiles(dataset: Dataset) -> list[LabelProfile]:
    """Mean feature vector of the examples carrying each label."""
    d, m = dataset.num_features, dataset.num_labels
    sums = [dict() for _ in range(m)]
    counts = np.zeros(m)
    for ex in dataset.examples:
        for j in ex.labels:
            counts[j] += 1
            acc = sums[j]
            for i, v in zip(ex.features.indices.tolist(), ex.features.values.tolist()):
                acc[i] = acc.get(i, 0.0) + v
    out = []
    for j in range(m):
        c = counts[j] or 1.0
        out.append(LabelProfile(j, SparseVector.from_pairs(((i, v / c) for i, v in sums[j].items()), d)))
    return out


def _profile_matrix(profiles: Sequence[LabelProfile]) -> sp.csr_matrix:
    d = profiles[0].profile.dim
    rows, cols, vals = [], [], []
    for r, p in enumerate(profiles):
        rows.extend([r] * p.profile.nnz)
        cols.extend(p.profile.indices.tolist())
        vals.extend(p.profile.values.tolist())
    P = sp.csr_matrix((vals, (rows, cols)), shape=(len(profiles), d))
    norms = np.sqrt(np.asarray(P.multiply(P).sum(axis=1)).ravel())
    norms[norms == 0] = 1.0
    return sp.diags(1.0 / norms) @ P


def _balanced_assign(dist: np.ndarray) -> np.ndarray:
    """Assign rows to columns of a distance matrix with cluster sizes differing by at most one."""
    n, b = dist.shape
    if b == 2:
        margin = dist[:, 0] - dist[:, 1]
        order = np.lexsort((np.arange(n), margin))
        assign = np.ones(n, dtype=np.int64)
        assign[order[: -(-n // 2)]] = 0
        return assign
    capacity = np.full(b, n // b)
    capacity[: n % b] += 1
    assign = np.full(n, -1, dtype=np.int64)
    flat = np.lexsort((np.arange(n * b), dist.ravel()))
    for pos in flat:
        r, c = divmod(int(pos), b)
        if assign[r] < 0 and capacity[c] > 0:
            assign[r] = c
            capacity[c] -= 1
    return assign


def balanced_kmeans(P, b: int, rng: np.random.Generator, epsilon: float = 1e-3, max_iter: int = 100) -> np.ndarray:
    """Balanced k-means on the rows of ``P`` (dense or sparse); returns cluster ids."""
    n = P.shape[0]
    init = np.sort(rng.choice(n, size=b, replace=False))
    C = P[init].toarray() if sp.issparse(P) else np.array(P[init], dtype=float)
    sq = np.asarray(P.multiply(P).sum(axis=1)).ravel() if sp.issparse(P) else (P * P).sum(axis=1)
    assign = None
    for _ in range(max_iter):
        dist = sq[:, None] - 2.0 * np.asarray(P @ C.T) + (C * C).sum(axis=1)[None, :]
        assign = _balanced_assign(dist)
        newC = np.empty_like(C)
        for c in range(b):
            rows = P[assign == c]
            newC[c] = np.asarray(rows.mean(axis=0)).ravel()
        shift = float(np.max(np.linalg.norm(newC - C, axis=1)))
        C = newC
        if shift < epsilon:
            break
    dist = sq[:, None] - 2.0 * np.asarray(P @ C.T) + (C * C).sum(axis=1)[None, :]
    return _balanced_assign(dist)


def build_kmeans_tree(profiles: Sequence[LabelProfile], b: int = 2, max_leaves: int = 100,
                      epsilon: float = 1e-3, seed: int = 0) -> LabelTree:
    """Top-down tree from recursive balanced k-means over L2-normalized label profiles.

    Clusters of at most ``max_leaves`` labels become a single node whose
    children are the leaves themselves.
    """
    if not profiles:
        raise TreeError("no label profiles")
    if b < 2 or max_leaves < 1:
        raise TreeError("need b >= 2 and max_leaves >= 1")
    profiles = sorted(profiles, key=lambda p: p.label)
    m = len(profiles)
    if [p.label for p in profiles] != list(range(m)):
        raise TreeError("profiles must cover labels 0..m-1")
    if m == 1:
        return LabelTree((-1,), ((),), (0,), b)
    P = _profile_matrix(profiles)
    rng = np.random.default_rng(seed)
    children: list[list[int]] = []
    node_label: list[int] = []

    def new_node(label=-1):
        children.append([])
        node_label.append(label)
        return len(children) - 1

    root = new_node()
    stack = [(root, np.arange(m))]
    while stack:
        node, members = stack.pop()
        if members.size <= max_leaves:
            children[node] = [new_node(int(j)) for j in members]
            continue
        assign = balanced_kmeans(P[members], min(b, members.size), rng, epsilon)
        for c in range(min(b, members.size)):
            part = members[assign == c]
            if part.size == 1:
                children[node].append(new_node(int(part[0])))
            else:
                child = new_node()
                children[node].append(child)
                stack.append((child, part))
    return _from_children(children, node_label, b)


def label_to_path(tree: LabelTree, label: int) -> list[int]:
    if not 0 <= label < tree.num_labels:
        raise TreeError(f"unknown label {label}")
    v = tree.leaf_of_label[label]
    path = [v]
    while v:
        v = tree.parent[v]
        path.append(v)
    return path[::-1]


def path_to_label(tree: LabelTree, leaf: int) -> int:
    if not 0 <= leaf < tree.num_nodes or tree.node_label[leaf] < 0:
        raise TreeError(f"node {leaf} is not a leaf")
    return tree.node_label[leaf]


def expected_cost(tree: LabelTree, node_mass: Mapping[int, float] | Sequence[float]) -> float:
    """Expected fraction of instances used to train all node classifiers.

    The root classifier sees every instance (the leading 1); any other node
    sees the instances positive at its parent, i.e. ``node_mass[parent]``.
    For binary multiclass trees this equals ``1 + 2 * sum_j p_j * depth_j``,
    the Huffman criterion. A single-node tree costs 1.
    """
    try:
        mass = [float(node_mass[v]) for v in range(tree.num_nodes)]
    except (KeyError, IndexError):
        raise TreeError("node mass missing for some node") from None
    return 1.0 + sum(mass[tree.parent[v]] for v in range(1, tree.num_nodes))


def multiclass_masses(tree: LabelTree, frequencies: Sequence[float]) -> list[float]:
    """Node masses when exactly one label is relevant: subtree sums of label frequencies."""
    mass = [0.0] * tree.num_nodes
    for j, f in enumerate(frequencies):
        mass[tree.leaf_of_label[j]] = float(f)
    for v in range(tree.num_nodes - 1, 0, -1):
        mass[tree.parent[v]] += mass[v]
    return mass


def union_masses(tree: LabelTree, union_prob: Callable[[frozenset[int]], float]) -> list[float]:
    """Node masses from P(at least one label of the subtree is relevant)."""
    return [float(union_prob(s)) for s in tree.subtree_labels()]


def empirical_union_prob(dataset: Dataset) -> Callable[[frozenset[int]], float]:
    label_sets = [ex.labels for ex in dataset.examples]
    n = len(label_sets)

    def prob(labels: frozenset[int]) -> float:
        return sum(1 for s in label_sets if s & labels) / n

    return prob


def brute_force_min_cost_tree(frequencies: Sequence[float], multiclass: bool = True,
                              union_prob: Callable[[frozenset[int]], float] | None = None,
                              max_labels: int = 8) -> tuple[LabelTree, float]:
    """Exact minimum expected cost over all full binary trees on the labels.

    Every full binary tree decomposes into a root split, so minimizing
    cost(S) = 2 * mass(S) + cost(A) + cost(S \\ A) over all splits covers every
    tree; the total adds 1 for the root classifier (see ``expected_cost``).
    Multiclass masses are frequency sums; otherwise ``union_prob`` supplies
    the probability that some label of a subset is relevant.
    """
    m = len(frequencies)
    if m > max_labels:
        raise TreeError(f"exhaustive search limited to {max_labels} labels")
    if m < 1:
        raise TreeError("no labels")
    if not multiclass and union_prob is None:
        raise TreeError("multi-label masses need union_prob")
    freqs = [float(f) for f in frequencies]
    if m == 1:
        return LabelTree((-1,), ((),), (0,), 2), 1.0

    full = (1 << m) - 1
    mass = {}
    for mask in range(1, full + 1):
        members = frozenset(j for j in range(m) if mask >> j & 1)
        mass[mask] = sum(freqs[j] for j in members) if multiclass else float(union_prob(members))
    best: dict[int, tuple[float, int]] = {}
    for mask in sorted(range(1, full + 1), key=lambda s: bin(s).count("1")):
        size = bin(mask).count("1")
        if size == 1:
            best[mask] = (0.0, 0)
            continue
        low = mask & -mask
        rest = mask ^ low
        choice, value = 0, float("inf")
        sub = rest
        # enumerate splits (A, mask \ A) with the lowest label fixed in A
        while True:
            a = low | sub
            if a != mask:
                c = best[a][0] + best[mask ^ a][0]
                if c < value:
                    value, choice = c, a
            if sub == 0:
                break
            sub = (sub - 1) & rest
        best[mask] = (2.0 * mass[mask] + value, choice)

    children: list[list[int]] = []
    node_label: list[int] = []

    def build(mask):
        v = len(children)
        children.append([])
        if bin(mask).count("1") == 1:
            node_label.append(mask.bit_length() - 1)
            return v
        node_label.append(-1)
        a = best[mask][1]
        children[v] = [build(a), build(mask ^ a)]
        return v

    build(full)
    return _from_children(children, node_label, 2), 1.0 + best[full][0]


def enumerate_binary_trees(labels: Sequence[int]):
    """Yield every full binary tree over ``labels`` as nested tuples (unordered children)."""
    labels = list(labels)
    if len(labels) == 1:
        yield labels[0]
        return
    first, rest = labels[0], labels[1:]
    for r in range(0, len(rest)):
        for extra in itertools.combinations(rest, r):
            left = [first, *extra]
            right = [j for j in rest if j not in extra]
            for lt in enumerate_binary_trees(left):
                for rt in enumerate_binary_trees(right):
                    yield (lt, rt)


def tree_from_nested(nested, m: int | None = None, arity: int = 2) -> LabelTree:
    """Build a LabelTree from nested tuples of label ids, e.g. ``(0, (1, 2))``."""
    children: list[list[int]] = []
    node_label: list[int] = []

    def walk(item):
        v = len(children)
        children.append([])
        if isinstance(item, tuple):
            node_label.append(-1)
            children[v] = [walk(c) for c in item]
        else:
            node_label.append(int(item))
        return v

    walk(nested)
    return _from_children(children, node_label, arity)


def format_tree(tree: LabelTree) -> str:
    lines = [f"tree {TREE_FORMAT_VERSION} {tree.num_nodes} {tree.arity}"]
    for v in range(tree.num_nodes):
        lines.append(f"{v} {tree.parent[v]} {tree.node_label[v]}")
    return "\n".join(lines) + "\n"


def parse_tree(text: str) -> LabelTree:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) != 4 or head[0] != "tree":
        raise TreeError("missing tree header")
    if int(head[1]) != TREE_FORMAT_VERSION:
        raise TreeError(f"unsupported tree format version {head[1]}")
    n, arity = int(head[2]), int(head[3])
    if len(lines) != n + 1:
        raise TreeError(f"expected {n} node lines, got {len(lines) - 1}")
    parent = [-1] * n
    node_label = [-1] * n
    children: list[list[int]] = [[] for _ in range(n)]
    for ln in lines[1:]:
        v, p, j = (int(t) for t in ln.split())
        if v < 0 or v >= n:
            raise TreeError(f"node id {v} out of range")
        parent[v], node_label[v] = p, j
        if p >= 0:
            children[p].append(v)
    return LabelTree(tuple(parent), tuple(tuple(c) for c in children), tuple(node_label), arity)
