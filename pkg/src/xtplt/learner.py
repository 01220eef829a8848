"""Logistic node classifiers, learning-rate schedules and input representations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import SparseVector

LOSS_CLAMP = 1e-12


def sigmoid(a: float) -> float:
    if a >= 0:
        return 1.0 / (1.0 + math.exp(-a))
    e = math.exp(a)
    return e / (1.0 + e)


def sigmoid_array(a: np.ndarray) -> np.ndarray:
    out = np.empty_like(a, dtype=float)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def logistic_loss(margin: float, target: float) -> float:
    """Unclamped -[t log s + (1 - t) log(1 - s)] with s = sigmoid(margin)."""
    # log(1 + e^a) computed stably
    softplus = max(margin, 0.0) + math.log1p(math.exp(-abs(margin)))
    return softplus - target * margin


@dataclass(frozen=True)
class LrSchedule:
    kind: str = "linear"  # "linear" or "inverse-power"
    eta0: float = 0.1
    power: float = 0.5
    total_updates: int = 0  # linear only; 0 lets the trainer fill in epochs * items

    def __post_init__(self):
        if self.kind not in ("linear", "inverse-power"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        if not self.eta0 > 0:
            raise ValueError("eta0 must be positive")
        if self.total_updates < 0:
            raise ValueError("total_updates must be non-negative")

    @classmethod
    def constant(cls, eta: float) -> "LrSchedule":
        return cls("inverse-power", eta, 0.0)

    def rate(self, t: int) -> float:
        """Step size at step ``t``: steps count from 0 (linear) or 1 (inverse-power)."""
        if self.kind == "linear":
            if self.total_updates < 1:
                raise ValueError("linear schedule has no total_updates set")
            return self.eta0 * max(0.0, 1.0 - t / self.total_updates)
        if t < 1:
            raise ValueError("inverse-power schedule is defined for t >= 1")
        return self.eta0 * (1.0 / t) ** self.power


@dataclass
class NodeModel:
    """Binary logistic classifier of one tree node.

    Weights are kept as ``scale * raw`` so that L2 shrinkage costs O(1) and
    a sparse update touches only the input's nonzeros.
    """

    dim: int
    raw: np.ndarray = field(default=None, repr=False)
    scale: float = 1.0
    bias: float = 0.0
    t: int = 0
    constant_positive: bool = False
    seen_negative: bool = False

    def __post_init__(self):
        if self.raw is None:
            self.raw = np.zeros(self.dim)

    @property
    def weights(self) -> np.ndarray:
        return self.raw * self.scale

    def set_weights(self, w: np.ndarray, bias: float | None = None) -> None:
        self.raw = np.array(w, dtype=float)
        self.scale = 1.0
        if bias is not None:
            self.bias = float(bias)

    def fold_scale(self) -> None:
        if self.scale != 1.0:
            self.raw = self.raw * self.scale
            self.scale = 1.0

    def margin(self, v) -> float:
        if isinstance(v, SparseVector):
            if v.dim != self.dim:
                raise ValueError(f"input dimension {v.dim} != model dimension {self.dim}")
            return float(self.raw[v.indices] @ v.values) * self.scale + self.bias
        v = np.asarray(v)
        if v.shape != (self.dim,):
            raise ValueError(f"input dimension {v.shape} != model dimension {self.dim}")
        return float(self.raw @ v) * self.scale + self.bias

    def copy(self) -> "NodeModel":
        return NodeModel(self.dim, self.raw.copy(), self.scale, self.bias, self.t,
                         self.constant_positive, self.seen_negative)


def predict_prob(node: NodeModel, v) -> float:
    if node.constant_positive:
        return 1.0
    return sigmoid(node.margin(v))


def update(node: NodeModel, v, target: int, weight: float, eta: float, l2: float = 0.0,
           input_grad: bool = True) -> np.ndarray | None:
    """One SGD step on ``weight * logistic_loss`` with L2 on the weights (not the bias).

    Returns the step-size-free gradient with respect to the input, computed
    with the pre-update weights, or None when ``input_grad`` is false.
    """
    if node.constant_positive:
        return np.zeros(node.dim) if input_grad else None
    g = weight * (sigmoid(node.margin(v)) - target)
    w_old = node.weights if input_grad else None
    decay = 1.0 - eta * l2
    if decay <= 0.0:
        node.raw[:] = 0.0
        node.scale = 1.0
    elif decay != 1.0:
        node.scale *= decay
        if node.scale < 1e-9:
            node.fold_scale()
    step = eta * g / node.scale
    if isinstance(v, SparseVector):
        node.raw[v.indices] -= step * v.values
    else:
        node.raw -= step * np.asarray(v)
    node.bias -= eta * g
    node.t += 1
    if target == 0:
        node.seen_negative = True
    return g * w_old if input_grad else None


def loss(node: NodeModel, v, target: int, weight: float = 1.0) -> float:
    return weight * logistic_loss(node.margin(v), target)


def gradient_check(node: NodeModel, v, target: int, h: float = 1e-5, abs_floor: float = 1e-8) -> float:
    """Largest error between analytic and central-difference loss gradients.

    Relative error is used where either gradient exceeds ``abs_floor``,
    absolute error below it. Covers every weight and the bias.
    """
    if not 0 < h <= 1e-3:
        raise ValueError("h must lie in (0, 1e-3]")
    dense = v.to_dense() if isinstance(v, SparseVector) else np.asarray(v, dtype=float)
    w = node.weights
    b = node.bias
    g = sigmoid(float(w @ dense) + b) - target
    analytic = np.append(g * dense, g)

    def f(wv, bv):
        return logistic_loss(float(wv @ dense) + bv, target)

    worst = 0.0
    for j in range(node.dim + 1):
        if j < node.dim:
            e = np.zeros(node.dim)
            e[j] = h
            num = (f(w + e, b) - f(w - e, b)) / (2 * h)
        else:
            num = (f(w, b + h) - f(w, b - h)) / (2 * h)
        a = analytic[j]
        scale = max(abs(a), abs(num))
        err = abs(a - num) / scale if scale > abs_floor else abs(a - num)
        worst = max(worst, err)
    return worst


def fit_batch(X: np.ndarray, targets: np.ndarray, weights: np.ndarray, l2: float = 1e-4,
              tol: float = 1e-10, max_iter: int = 100) -> tuple[np.ndarray, float]:
    """Weighted L2-regularized logistic regression by damped Newton steps.

    Minimizes ``sum_i w_i * loss_i / sum_i w_i + l2 / 2 * |w|^2`` with an
    unregularized bias. Deterministic for a given input.
    """
    n, d = X.shape
    total = float(weights.sum())
    if total <= 0:
        return np.zeros(d), 0.0
    A = np.hstack([X, np.ones((n, 1))])
    c = weights / total
    reg = np.full(d + 1, l2)
    reg[-1] = 0.0
    theta = np.zeros(d + 1)

    def objective(th):
        a = A @ th
        return float(c @ (np.logaddexp(0.0, a) - targets * a) + 0.5 * (reg * th) @ th)

    f = objective(theta)
    for _ in range(max_iter):
        s = sigmoid_array(A @ theta)
        grad = A.T @ (c * (s - targets)) + reg * theta
        if np.max(np.abs(grad)) < tol:
            break
        H = (A * (c * s * (1 - s))[:, None]).T @ A + np.diag(reg) + 1e-12 * np.eye(d + 1)
        step = np.linalg.solve(H, grad)
        decrement = float(grad @ step)
        if decrement < 1e-13:
            break
        alpha = 1.0
        while True:
            cand = theta - alpha * step
            fc = objective(cand)
            if fc <= f - 1e-4 * alpha * decrement:
                break
            alpha *= 0.5
            if alpha < 1e-8:
                return theta[:-1].copy(), float(theta[-1])
        theta, f = cand, fc
    return theta[:-1].copy(), float(theta[-1])


@dataclass
class Representation:
    """Maps a sparse input to the vector the node classifiers see.

    ``sparse`` passes the input through; ``dense`` averages rows of a
    trainable embedding matrix weighted by 1 (uniform) or by the stored
    feature value (tfidf, for inputs already TF-IDF transformed).
    """

    kind: str = "sparse"
    num_features: int = 1
    dim: int = 0
    weighting: str = "uniform"
    embedding: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("sparse", "dense"):
            raise ValueError(f"unknown representation {self.kind!r}")
        if self.weighting not in ("uniform", "tfidf"):
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if self.kind == "sparse":
            self.dim = self.num_features
        elif self.embedding is None:
            self.embedding = np.zeros((self.num_features, self.dim))

    @classmethod
    def dense_random(cls, num_features: int, dim: int, weighting: str = "uniform",
                     rng: np.random.Generator | None = None) -> "Representation":
        rng = rng if rng is not None else np.random.default_rng(0)
        E = rng.uniform(-1.0 / dim, 1.0 / dim, size=(num_features, dim))
        return cls("dense", num_features, dim, weighting, E)

    def mixing_weights(self, x: SparseVector) -> np.ndarray:
        if self.weighting == "uniform":
            return np.ones(x.nnz)
        return np.abs(x.values)

    def transform(self, x: SparseVector):
        if x.dim != self.num_features:
            raise ValueError(f"input dimension {x.dim} != {self.num_features}")
        if self.kind == "sparse":
            return x
        if x.nnz == 0:
            return np.zeros(self.dim)
        w = self.mixing_weights(x)
        return (w @ self.embedding[x.indices]) / w.sum()

    def backprop(self, x: SparseVector, input_gradient: np.ndarray, eta: float) -> None:
        """Move the embedding rows of ``x``'s features against ``input_gradient``."""
        if self.kind != "dense":
            raise ValueError("only dense representations are trainable")
        if x.nnz == 0:
            return
        w = self.mixing_weights(x)
        share = w / w.sum()
        self.embedding[x.indices] -= eta * share[:, None] * input_gradient[None, :]


def backprop_embedding(repr_: Representation, x: SparseVector, input_gradient: np.ndarray, eta: float) -> None:
    repr_.backprop(x, input_gradient, eta)
