"""Paired PLT vs pick-one-label HSM comparison on the synthetic label models.

Each run draws n = 100 000 points (d = 3, m = 32), trains both learners on
the first half and reports precision@1 on the second half. The summary holds
means, standard deviations and paired t / sign / Wilcoxon p-values.

    python3 scripts/replicate_synthetic_comparison.py --runs 50 --out results.json
"""

import argparse
import json
import logging
import time

from xtplt.evaluation import format_report
from xtplt.experiments import replicate, summarize


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--models", nargs="+", default=["independent", "dependent"],
                    choices=["independent", "dependent", "multiclass"])
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--mode", choices=["batch", "online"], default="batch")
    ap.add_argument("--l2", type=float, default=1e-4)
    ap.add_argument("--out", help="write per-run scores and the summary as JSON")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    report = {}
    for model in args.models:
        start = time.perf_counter()
        results, tests = replicate(model, args.runs, args.seed, n=args.n, mode=args.mode, l2=args.l2)
        summary = summarize(model, results, tests)
        summary["seconds"] = time.perf_counter() - start
        print(format_report({k: v for k, v in summary.items() if k != "model"}, title=model))
        report[model] = {"summary": summary,
                         "runs": [{"seed": r.seed, "plt": r.p1_plt, "hsm": r.p1_hsm} for r in results]}
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)


if __name__ == "__main__":
    main()
