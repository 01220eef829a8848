"""PLT versus pick-one-label HSM on the synthetic label models."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .evaluation import PairedTests, paired_tests
from .hsm import HsmModel, predict_scores_batch_hsm, train_hsm, train_hsm_batch
from .learner import LrSchedule, Representation
from .plt import PltModel, predict_scores_batch, top1_from_scores, train_plt, train_plt_batch
from .synth import GENERATORS, SynthConfig
from .tree import build_complete, build_huffman

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunResult:
    seed: int
    p1_plt: float
    p1_hsm: float
    top1_agreement: float


def precision_at_1(top1: np.ndarray, Y: np.ndarray) -> float:
    return float(Y[np.arange(Y.shape[0]), top1].mean())


def build_tree(kind: str, train, arity: int = 2):
    freqs = train.label_frequencies()
    if kind == "complete":
        return build_complete(train.num_labels, arity, freqs)
    if kind == "huffman":
        return build_huffman(freqs + 1e-12, arity)
    raise ValueError(f"unsupported tree {kind!r} for synthetic runs")


def compare_on_synthetic(model: str, seed: int, d: int = 3, m: int = 32, n: int = 100_000, c: float = 10.0,
                         mode: str = "batch", l2: float = 1e-4, tree: str = "complete",
                         epochs: int = 1, eta: float = 0.5) -> RunResult:
    """Train both learners on the first half of one synthetic draw; p@1 on the second half."""
    cfg = SynthConfig(d=d, m=m, n=n, c=c, seed=seed)
    data = GENERATORS[model](cfg)
    train, test = data.split(n // 2)
    t = build_tree(tree, train)
    rep = Representation("sparse", d)
    plt_model = PltModel.create(t, rep)
    hsm_model = HsmModel.create(t, rep)
    if mode == "batch":
        train_plt_batch(plt_model, train, l2)
        train_hsm_batch(hsm_model, train, l2)
    else:
        schedule = LrSchedule("linear", eta)
        train_plt(plt_model, train, epochs, schedule, l2)
        train_hsm(hsm_model, train, "expand", epochs, schedule, l2, seed=seed)
    X, Y = test.feature_matrix(), test.label_matrix()
    top_plt = top1_from_scores(predict_scores_batch(plt_model, X))
    top_hsm = top1_from_scores(predict_scores_batch_hsm(hsm_model, X))
    return RunResult(seed, precision_at_1(top_plt, Y), precision_at_1(top_hsm, Y),
                     float(np.mean(top_plt == top_hsm)))


def replicate(model: str, runs: int, base_seed: int = 0, **kw) -> tuple[list[RunResult], PairedTests]:
    results = []
    for r in range(runs):
        start = time.perf_counter()
        res = compare_on_synthetic(model, base_seed + r, **kw)
        log.info("%s run %d: plt=%.4f hsm=%.4f (%.1fs)", model, r, res.p1_plt, res.p1_hsm,
                 time.perf_counter() - start)
        results.append(res)
    tests = paired_tests([100 * r.p1_plt for r in results], [100 * r.p1_hsm for r in results])
    return results, tests


def summarize(model: str, results: list[RunResult], tests: PairedTests) -> dict:
    a = np.array([100 * r.p1_hsm for r in results])
    b = np.array([100 * r.p1_plt for r in results])
    return {
        "model": model, "runs": len(results),
        "hsm_mean": float(a.mean()), "hsm_std": float(a.std(ddof=1)) if a.size > 1 else 0.0,
        "plt_mean": float(b.mean()), "plt_std": float(b.std(ddof=1)) if b.size > 1 else 0.0,
        **tests.as_dict(),
    }
