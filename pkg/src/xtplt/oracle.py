"""Exact computations on explicit label distributions for small label spaces.

A distribution is a table over label vectors encoded as bitmasks: bit j set
means label j is relevant. Used as ground truth for the consistency and
regret results of PLTs and the pick-one-label reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence, TextIO

import numpy as np

from .tree import LabelTree, label_to_path

MAX_LABELS = 12
IDENTITY_TOL = 1e-12
BOUND_SLACK = 1e-9
CLAMP = 1e-12


@dataclass(frozen=True)
class ExactDistribution:
    m: int
    table: Mapping[int, float]

    def __post_init__(self):
        if not 1 <= self.m <= MAX_LABELS:
            raise ValueError(f"m must lie in [1, {MAX_LABELS}]")
        table = {int(k): float(p) for k, p in self.table.items() if p != 0.0}
        if any(not 0 <= k < 1 << self.m for k in table):
            raise ValueError("label vector outside the label space")
        if any(p < 0 for p in table.values()):
            raise ValueError("negative probability")
        if abs(sum(table.values()) - 1.0) > IDENTITY_TOL:
            raise ValueError(f"probabilities sum to {sum(table.values())!r}")
        object.__setattr__(self, "table", table)

    @classmethod
    def from_vectors(cls, entries: Mapping[str, float]) -> "ExactDistribution":
        """Build from label-vector strings, first character = label 0: ``{"110": 0.5}``."""
        m = len(next(iter(entries)))
        return cls(m, {vector_to_mask(s): p for s, p in entries.items()})

    def prob_any(self, labels) -> float:
        """Probability that at least one of ``labels`` is relevant."""
        mask = sum(1 << j for j in labels)
        return sum(p for y, p in self.table.items() if y & mask)


def vector_to_mask(s: str) -> int:
    return sum(1 << j for j, ch in enumerate(s) if ch == "1")


def mask_to_vector(mask: int, m: int) -> str:
    return "".join("1" if mask >> j & 1 else "0" for j in range(m))


def read_distribution(stream: TextIO) -> ExactDistribution:
    entries = {}
    for line in stream:
        line = line.split("#", 1)[0].strip()
        if line:
            vec, p = line.split()
            entries[vec] = float(p)
    return ExactDistribution.from_vectors(entries)


def write_distribution(dist: ExactDistribution, stream: TextIO) -> None:
    for mask in sorted(dist.table):
        stream.write(f"{mask_to_vector(mask, dist.m)} {dist.table[mask]!r}\n")


def marginals(dist: ExactDistribution) -> np.ndarray:
    eta = np.zeros(dist.m)
    for y, p in dist.table.items():
        for j in range(dist.m):
            if y >> j & 1:
                eta[j] += p
    return eta


def pickone_map(dist: ExactDistribution) -> np.ndarray:
    """Multiclass marginals induced by picking one relevant label uniformly.

    The empty label vector contributes nothing, so the result sums to
    1 - P(no label).
    """
    out = np.zeros(dist.m)
    for y, p in dist.table.items():
        s = bin(y).count("1")
        if s == 0:
            continue
        for j in range(dist.m):
            if y >> j & 1:
                out[j] += p / s
    return out


def topk_labels(scores: Sequence[float], k: int) -> list[int]:
    """Indices of the k largest scores; ties go to the lower index."""
    if not 1 <= k <= len(scores):
        raise ValueError("k out of range")
    return sorted(range(len(scores)), key=lambda j: (-scores[j], j))[:k]


def optimal_topk(dist: ExactDistribution, k: int) -> list[int]:
    return topk_labels(marginals(dist), k)


def pk_regret_from_marginals(eta: Sequence[float], predicted: Sequence[int], k: int) -> float:
    predicted = list(predicted)
    if len(predicted) != k or len(set(predicted)) != k:
        raise ValueError(f"need exactly {k} distinct predicted labels")
    best = sum(eta[j] for j in topk_labels(eta, k))
    return (best - sum(eta[j] for j in predicted)) / k


def pk_regret(dist: ExactDistribution, predicted: Sequence[int], k: int) -> float:
    """Precision@k regret of a predicted label set under ``dist``."""
    return pk_regret_from_marginals(marginals(dist), predicted, k)


def make_independent(etas: Sequence[float]) -> ExactDistribution:
    etas = [float(e) for e in etas]
    m = len(etas)
    if any(not 0 <= e <= 1 for e in etas):
        raise ValueError("marginals must lie in [0, 1]")
    table = {}
    for y in range(1 << m):
        p = 1.0
        for j, e in enumerate(etas):
            p *= e if y >> j & 1 else 1.0 - e
        table[y] = p
    total = sum(table.values())
    return ExactDistribution(m, {y: p / total for y, p in table.items()})


def is_order_preserved(dist: ExactDistribution, tol: float = IDENTITY_TOL) -> bool:
    """True when every pair of labels is ordered alike by eta and by the pick-one map."""
    eta, eta1 = marginals(dist), pickone_map(dist)
    for i in range(dist.m):
        for j in range(dist.m):
            if (eta[i] >= eta[j] - tol) != (eta1[i] >= eta1[j] - tol):
                return False
    return True


def theorem2_check(etas: Sequence[float], estimates: Sequence[float], k: int) -> tuple[float, float, bool]:
    """Regret of top-k by estimates versus twice the largest estimation error."""
    etas = np.asarray(etas, dtype=float)
    estimates = np.asarray(estimates, dtype=float)
    if etas.shape != estimates.shape:
        raise ValueError("length mismatch")
    regret = pk_regret_from_marginals(etas, topk_labels(estimates, k), k)
    bound = 2.0 * float(np.max(np.abs(etas - estimates)))
    return regret, bound, regret <= bound + BOUND_SLACK


def _clamp(p: float) -> tuple[float, bool]:
    q = min(max(p, CLAMP), 1.0 - CLAMP)
    return q, q != p


def logistic_regret(p: float, q: float) -> float:
    """Conditional logistic-loss regret of estimate q when the truth is p: KL(p || q)."""
    out = 0.0
    if p > 0:
        out += p * math.log(p / q)
    if p < 1:
        out += (1 - p) * math.log((1 - p) / (1 - q))
    return max(out, 0.0)


@dataclass(frozen=True)
class BoundConfig:
    lam: float = 4.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")


@dataclass(frozen=True)
class Theorem1Result:
    lhs: float
    rhs: float
    holds: bool
    clamped: bool


def theorem1_check(tree: LabelTree, truths: Mapping[int, float] | Sequence[float],
                   estimates: Mapping[int, float] | Sequence[float], label: int,
                   config: BoundConfig = BoundConfig()) -> Theorem1Result:
    """Path bound relating marginal estimation error to node regrets.

    ``truths[v]`` / ``estimates[v]`` are P(node v positive | parent positive, x)
    and its estimate (for the root: P(some label positive | x)).
    """
    path = label_to_path(tree, label)
    clamped = False
    p_list, q_list = [], []
    for v in path:
        p, cp = _clamp(float(truths[v]))
        q, cq = _clamp(float(estimates[v]))
        clamped |= cp or cq
        p_list.append(p)
        q_list.append(q)
    lhs = abs(math.prod(float(truths[v]) for v in path) - math.prod(float(estimates[v]) for v in path))
    c = math.sqrt(2.0 / config.lam)
    rhs, prefix = 0.0, 1.0
    for v, p, q in zip(path, p_list, q_list):
        rhs += prefix * c * math.sqrt(logistic_regret(p, q))
        prefix *= float(truths[v])
    return Theorem1Result(lhs, rhs, lhs <= rhs + BOUND_SLACK, clamped)


def node_conditionals(tree: LabelTree, dist: ExactDistribution) -> list[float]:
    """True P(node positive | parent positive) for every node under ``dist``."""
    mass = [dist.prob_any(s) for s in tree.subtree_labels()]
    out = []
    for v in range(tree.num_nodes):
        parent_mass = 1.0 if v == 0 else mass[tree.parent[v]]
        out.append(mass[v] / parent_mass if parent_mass > 0 else 0.0)
    return out


PROPOSITION1 = ExactDistribution.from_vectors({"100": 0.1, "110": 0.5, "001": 0.4})
