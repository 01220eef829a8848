"""Search random 3-label distributions for one where the Huffman tree over the
label marginals does not minimize the expected PLT training cost.

Writes the first certificate found in the distribution fixture format.
"""

import argparse
import sys

import numpy as np

from xtplt import oracle
from xtplt.tree import brute_force_min_cost_tree, build_huffman, expected_cost, union_masses


def search(seed: int, max_tries: int = 100_000, m: int = 3):
    rng = np.random.default_rng(seed)
    for attempt in range(max_tries):
        # sparse support over non-empty label vectors makes overlaps likely
        support = rng.choice(np.arange(1, 1 << m), size=rng.integers(2, 5), replace=False)
        probs = np.round(rng.dirichlet(np.ones(support.size)), 3)
        probs[-1] = round(1.0 - probs[:-1].sum(), 3)
        if np.any(probs <= 0):
            continue
        dist = oracle.ExactDistribution(m, dict(zip(support.tolist(), probs.tolist())))
        eta = oracle.marginals(dist)
        tree = build_huffman(eta, 2)
        cost = expected_cost(tree, union_masses(tree, dist.prob_any))
        _, best = brute_force_min_cost_tree(eta, multiclass=False, union_prob=dist.prob_any)
        if best < cost - 1e-9:
            return attempt, dist, cost, best
    return None


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-o", "--output", default="-")
    args = ap.parse_args()
    found = search(args.seed)
    if found is None:
        sys.exit("no counterexample found")
    attempt, dist, cost, best = found
    out = sys.stdout if args.output == "-" else open(args.output, "w")
    out.write(f"# huffman cost {cost!r}, optimum {best!r} (seed {args.seed}, attempt {attempt})\n")
    oracle.write_distribution(dist, out)


if __name__ == "__main__":
    main()
