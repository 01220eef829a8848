"""Precision@k and paired significance tests for comparing two learners run-by-run."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence


def precision_at_k(true_labels: Iterable[int], predicted: Sequence[int], k: int) -> float:
    if k < 1:
        raise ValueError("k must be positive")
    if len(predicted) < k:
        raise ValueError(f"need at least {k} predictions, got {len(predicted)}")
    relevant = set(true_labels)
    return sum(1 for j in predicted[:k] if j in relevant) / k


def mean_precision_at_k(true_sets: Sequence[Iterable[int]], predictions: Sequence[Sequence[int]], k: int) -> float:
    if len(true_sets) != len(predictions):
        raise ValueError(f"{len(true_sets)} examples but {len(predictions)} predictions")
    if not true_sets:
        raise ValueError("mean precision of an empty dataset is undefined")
    return sum(precision_at_k(t, p, k) for t, p in zip(true_sets, predictions)) / len(true_sets)


# --- special functions -------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for i in range(1, 500):
        m2 = 2 * i
        aa = i * (b - i) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + i) * (qab + i) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(ln_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(ln_front) * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


def normal_two_sided(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


def binom_two_sided(wins: int, n: int) -> float:
    """Exact two-sided sign-test p-value for ``wins`` successes out of ``n`` at p = 1/2."""
    if n == 0:
        return 1.0
    tail = min(wins, n - wins)
    p = sum(math.comb(n, i) for i in range(tail + 1)) / 2.0 ** n
    return min(1.0, 2.0 * p)


# --- paired tests ------------------------------------------------------------

@dataclass(frozen=True)
class PairedTests:
    t_test: float
    sign: float
    wilcoxon: float
    mean_difference: float
    wins: int
    losses: int

    def as_dict(self) -> dict:
        return {"t_test_p": self.t_test, "sign_p": self.sign, "wilcoxon_p": self.wilcoxon,
                "mean_difference": self.mean_difference, "wins": self.wins, "losses": self.losses}


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> float:
    diffs = [x - y for x, y in zip(a, b)]
    n = len(diffs)
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    return student_t_two_sided(mean / math.sqrt(var / n), n - 1)


def sign_test(a: Sequence[float], b: Sequence[float]) -> float:
    """Exact two-sided sign test; zero differences are dropped."""
    wins = sum(1 for x, y in zip(a, b) if x > y)
    losses = sum(1 for x, y in zip(a, b) if x < y)
    return binom_two_sided(wins, wins + losses)


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sided Wilcoxon signed-rank test, normal approximation with tie correction.

    Zero differences are dropped; tied magnitudes receive their mid-rank.
    """
    diffs = [x - y for x, y in zip(a, b) if x != y]
    n = len(diffs)
    if n == 0:
        return 1.0
    order = sorted(range(n), key=lambda i: abs(diffs[i]))
    ranks = [0.0] * n
    tie_term = 0.0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and abs(diffs[order[j + 1]]) == abs(diffs[order[i]]):
            j += 1
        mid = (i + j) / 2.0 + 1.0
        for t in range(i, j + 1):
            ranks[order[t]] = mid
        size = j - i + 1
        tie_term += size ** 3 - size
        i = j + 1
    w_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
    if var <= 0:
        return 1.0
    return normal_two_sided((w_plus - mean) / math.sqrt(var))


def paired_tests(scores_a: Sequence[float], scores_b: Sequence[float]) -> PairedTests:
    if len(scores_a) != len(scores_b):
        raise ValueError("paired score lists differ in length")
    if len(scores_a) < 2:
        raise ValueError("need at least two pairs")
    diffs = [x - y for x, y in zip(scores_a, scores_b)]
    return PairedTests(
        t_test=paired_t_test(scores_a, scores_b),
        sign=sign_test(scores_a, scores_b),
        wilcoxon=wilcoxon_signed_rank(scores_a, scores_b),
        mean_difference=sum(diffs) / len(diffs),
        wins=sum(1 for d in diffs if d > 0),
        losses=sum(1 for d in diffs if d < 0),
    )


def format_report(rows: dict[str, float], title: str | None = None) -> str:
    """Aligned text table followed by machine-readable ``key=value`` lines."""
    width = max((len(k) for k in rows), default=0)
    lines = [title] if title else []
    lines += [f"{k:<{width}}  {v:>12.6g}" for k, v in rows.items()]
    lines += [f"{k}={v!r}" for k, v in rows.items()]
    return "\n".join(lines) + "\n"
