"""Synthetic linear label models: multiclass softmax, independent and dependent multi-label."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset, Example, SparseVector


@dataclass(frozen=True)
class SynthConfig:
    d: int = 3
    m: int = 32
    n: int = 100_000
    c: float = 10.0
    noise_sigma2: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if min(self.d, self.m, self.n) < 1:
            raise ValueError("d, m and n must be positive")
        if not self.c > 0:
            raise ValueError("scaling factor c must be positive")
        if self.noise_sigma2 < 0:
            raise ValueError("noise variance must be non-negative")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _streams(seed: int):
    """Independent generators for geometry, label draws and the mixing matrix."""
    geo, lab, mix = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(geo), np.random.default_rng(lab), np.random.default_rng(mix)


def unit_sphere(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    g = rng.standard_normal((count, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    while np.any(norms == 0):  # measure-zero, but keep the contract
        bad = (norms == 0).ravel()
        g[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
    return g / norms


def unit_ball(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    direction = unit_sphere(rng, count, d)
    radius = rng.uniform(size=(count, 1)) ** (1.0 / d)
    return direction * radius


def sample_geometry(config: SynthConfig, rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Label weight vectors on the unit sphere (m x d) and instances in the unit ball (n x d)."""
    rng = rng if rng is not None else _streams(config.seed)[0]
    W = unit_sphere(rng, config.m, config.d)
    X = unit_ball(rng, config.n, config.d)
    return W, X


def softmax_probs(X: np.ndarray, W: np.ndarray, c: float) -> np.ndarray:
    a = c * (X @ W.T)
    a -= a.max(axis=1, keepdims=True)
    e = np.exp(a)
    return e / e.sum(axis=1, keepdims=True)


def logistic_probs(X: np.ndarray, W: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-(X @ W.T)))


def draw_categorical(P: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(P, axis=1)
    r = rng.uniform(size=(P.shape[0], 1)) * cdf[:, -1:]
    return np.minimum((cdf <= r).sum(axis=1), P.shape[1] - 1)


def multiclass_labels(X: np.ndarray, W: np.ndarray, c: float, rng: np.random.Generator) -> np.ndarray:
    """One-hot rows with the label drawn from the softmax of ``c * W x``."""
    y = draw_categorical(softmax_probs(X, W, c), rng)
    Y = np.zeros((X.shape[0], W.shape[0]), dtype=bool)
    Y[np.arange(X.shape[0]), y] = True
    return Y


def independent_labels(X: np.ndarray, W: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Each label on with probability sigmoid(w_j . x), one fresh uniform per entry."""
    return rng.uniform(size=(X.shape[0], W.shape[0])) < logistic_probs(X, W)


def dependent_labels(X: np.ndarray, W: np.ndarray, M: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Elementwise ``M (W^T x + eps) > 0`` for every row of X (eps: n x m)."""
    return ((X @ W.T + eps) @ M.T) > 0


def _to_dataset(X: np.ndarray, Y: np.ndarray, source: str) -> Dataset:
    n, d = X.shape
    m = Y.shape[1]
    examples = []
    all_idx = np.arange(d, dtype=np.int64)
    dense_rows = np.all(X != 0, axis=1)
    label_lists = [np.flatnonzero(row).tolist() for row in Y]
    for i in range(n):
        if dense_rows[i]:
            x = SparseVector.unchecked(all_idx, X[i].copy(), d)
        else:
            x = SparseVector.from_dense(X[i])
        examples.append(Example(x, frozenset(label_lists[i])))
    ds = Dataset(examples, d, m, source=source)
    ds._dense = X.copy()
    return ds


def gen_multiclass(config: SynthConfig) -> Dataset:
    geo, lab, _ = _streams(config.seed)
    W, X = sample_geometry(config, geo)
    return _to_dataset(X, multiclass_labels(X, W, config.c, lab), f"synth:multiclass:{config.to_json()}")


def gen_independent(config: SynthConfig) -> Dataset:
    geo, lab, _ = _streams(config.seed)
    W, X = sample_geometry(config, geo)
    return _to_dataset(X, independent_labels(X, W, lab), f"synth:independent:{config.to_json()}")


def mixing_matrix(config: SynthConfig) -> np.ndarray:
    return _streams(config.seed)[2].uniform(-1.0, 1.0, size=(config.m, config.m))


def gen_dependent(config: SynthConfig, mixing: np.ndarray | None = None, noise: bool = True) -> Dataset:
    """Labels from mixed, noisy latent scores; noise variance ``noise_sigma2`` per coordinate."""
    geo, lab, _ = _streams(config.seed)
    W, X = sample_geometry(config, geo)
    M = mixing_matrix(config) if mixing is None else np.asarray(mixing, dtype=float)
    if noise:
        eps = lab.normal(0.0, np.sqrt(config.noise_sigma2), size=(config.n, config.m))
    else:
        eps = np.zeros((config.n, config.m))
    return _to_dataset(X, dependent_labels(X, W, M, eps), f"synth:dependent:{config.to_json()}")


GENERATORS = {
    "multiclass": gen_multiclass,
    "independent": gen_independent,
    "dependent": gen_dependent,
}


def label_cardinality_stats(dataset: Dataset) -> dict:
    sizes = np.array([len(ex.labels) for ex in dataset.examples])
    return {"examples": int(sizes.size), "empty": int((sizes == 0).sum()),
            "mean_labels": float(sizes.mean()) if sizes.size else 0.0}
