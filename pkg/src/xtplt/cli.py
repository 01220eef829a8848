"""Command-line interface: train, predict, eval, tree, synth, verify, bench.

Exit codes: 0 success, 1 usage error, 2 data or model file error,
3 verification failure. Set ``XT_LOG`` (e.g. ``INFO``) for log output.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, experiments, verify
from .data import DataError, load_xmlc, save_xmlc, tfidf_dataset, tfidf_fit, tfidf_transform
from .evaluation import format_report, mean_precision_at_k
from .hsm import HsmModel, predict_topk_hsm, train_hsm, train_hsm_batch
from .learner import LrSchedule, Representation
from .persist import ModelBundle, ModelFormatError, load_model, save_model
from .plt import PltModel, predict_topk, train_plt, train_plt_batch
from .synth import GENERATORS, SynthConfig, label_cardinality_stats
from .tree import (TreeError, build_complete, build_huffman, build_kmeans_tree, expected_cost, format_tree,
                   label_profiles, parse_tree, union_masses, empirical_union_prob)

log = logging.getLogger("xtplt")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3
SUBSTREAMS = ("tree", "init", "shuffle", "reduction")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def substreams(seed: int) -> dict[str, int]:
    """One integer seed per named purpose, all derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(len(SUBSTREAMS))
    return {name: int(child.generate_state(1, np.uint64)[0] >> np.uint64(1))
            for name, child in zip(SUBSTREAMS, children)}


def _positive(kind):
    def conv(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return conv


def _nonnegative(text):
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _add_tree_args(p):
    p.add_argument("--tree", choices=["complete", "huffman", "kmeans"], default="kmeans")
    p.add_argument("--arity", type=int, default=2, help="tree arity b (>= 2)")
    p.add_argument("--max-leaves", type=_positive(int), default=100,
                   help="k-means recursion stops at this many labels per node")
    p.add_argument("--kmeans-eps", type=_positive(float), default=1e-3)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xtplt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a PLT or HSM model")
    p.add_argument("data", help="training file in the sparse multi-label text format")
    p.add_argument("-o", "--output", required=True, help="model file to write")
    p.add_argument("--algo", choices=["plt", "hsm"], default="plt")
    _add_tree_args(p)
    p.add_argument("--tree-file", help="use a stored tree instead of building one")
    p.add_argument("--dim", type=int, default=0, help="dense embedding size (0 = sparse inputs)")
    p.add_argument("--weighting", choices=["uniform", "tfidf"], default="uniform",
                   help="how feature embeddings are averaged")
    p.add_argument("--tfidf", action="store_true", help="TF-IDF transform the inputs")
    p.add_argument("--lr", type=_positive(float), default=0.1)
    p.add_argument("--l2", type=_nonnegative, default=0.0)
    p.add_argument("--epochs", type=_positive(int), default=1)
    p.add_argument("--schedule", choices=["linear", "inverse-power"], default="linear")
    p.add_argument("--power", type=_nonnegative, default=0.5, help="exponent of the inverse-power schedule")
    p.add_argument("--pickone", choices=["sample", "expand"], default="sample",
                   help="HSM multi-label reduction")
    p.add_argument("--mode", choices=["online", "batch"], default="online",
                   help="batch fits every node to convergence (sparse inputs only)")
    p.add_argument("--threads", type=_positive(int), default=1,
                   help="more than one thread gives non-deterministic shared updates")
    p.add_argument("--renormalize", action="store_true",
                   help="PLT prediction: scale sibling estimates up to sum 1")
    p.add_argument("--no-shuffle", action="store_true", help="keep file order in every epoch")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("predict", help="write top-k labels with scores")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("-k", type=_positive(int), default=5)
    p.add_argument("-o", "--output", help="predictions file (default: stdout)")
    p.add_argument("--threads", type=_positive(int), default=1)

    p = sub.add_parser("eval", help="precision@k of a model or of a predictions file")
    p.add_argument("data")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--predictions", help="file written by the predict command")
    p.add_argument("-k", type=_positive(int), nargs="+", default=[1, 3, 5])
    p.add_argument("--threads", type=_positive(int), default=1)

    p = sub.add_parser("tree", help="build a label tree and report its expected training cost")
    p.add_argument("data")
    p.add_argument("-o", "--output", help="tree file (default: stdout)")
    _add_tree_args(p)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("synth", help="sample a synthetic data set")
    p.add_argument("--model", choices=sorted(GENERATORS), required=True)
    p.add_argument("--d", type=_positive(int), default=3)
    p.add_argument("--m", type=_positive(int), default=32)
    p.add_argument("--n", type=_positive(int), default=100_000)
    p.add_argument("--c", type=_positive(float), default=10.0, help="softmax scale (multiclass)")
    p.add_argument("--noise-var", type=_nonnegative, default=0.25, help="noise variance (dependent)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("verify", help="run the exact checks of the theoretical results")
    p.add_argument("--suite", choices=[*verify.SUITES, "all"], default="all")

    p = sub.add_parser("bench", help="paired PLT vs HSM comparison on synthetic data")
    p.add_argument("--model", choices=["independent", "dependent", "multiclass"], default="dependent")
    p.add_argument("--runs", type=_positive(int), default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=_positive(int), default=100_000)
    p.add_argument("--mode", choices=["batch", "online"], default="batch")
    p.add_argument("--l2", type=_nonnegative, default=1e-4)
    p.add_argument("--json", action="store_true", help="print key-value lines instead of a table")
    return parser


# ---------------------------------------------------------------- commands

def _build_tree(args, dataset, seed: int):
    freqs = dataset.label_frequencies()
    if args.tree == "complete":
        return build_complete(dataset.num_labels, args.arity, freqs)
    if args.tree == "huffman":
        # unseen labels still need a leaf
        return build_huffman(freqs + 1e-12, args.arity)
    return build_kmeans_tree(label_profiles(dataset), args.arity, args.max_leaves, args.kmeans_eps, seed)


def cmd_train(args) -> int:
    if args.arity < 2:
        raise UsageError("--arity must be at least 2")
    if args.dim < 0:
        raise UsageError("--dim must be non-negative")
    if args.mode == "batch" and args.dim:
        raise UsageError("--mode batch needs sparse inputs (--dim 0)")
    seeds = substreams(args.seed)
    start = time.perf_counter()
    dataset = load_xmlc(args.data)
    idf = None
    if args.tfidf:
        idf = tfidf_fit(dataset)
        dataset = tfidf_dataset(dataset, idf)
    if args.tree_file:
        with open(args.tree_file) as fh:
            tree = parse_tree(fh.read())
    else:
        tree = _build_tree(args, dataset, seeds["tree"])
    if args.dim:
        rep = Representation.dense_random(dataset.num_features, args.dim, args.weighting,
                                          np.random.default_rng(seeds["init"]))
    else:
        rep = Representation("sparse", dataset.num_features)
    schedule = LrSchedule(args.schedule, args.lr, args.power)
    shuffle = None if args.no_shuffle else seeds["shuffle"]
    if args.algo == "plt":
        model = PltModel.create(tree, rep, renormalize=args.renormalize)
        if args.mode == "batch":
            train_plt_batch(model, dataset, args.l2)
        else:
            train_plt(model, dataset, args.epochs, schedule, args.l2, args.threads, shuffle)
    else:
        model = HsmModel.create(tree, rep)
        if args.mode == "batch":
            train_hsm_batch(model, dataset, args.l2)
        else:
            train_hsm(model, dataset, args.pickone, args.epochs, schedule, args.l2,
                      seeds["reduction"], args.threads, shuffle)
    hyper = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command", "output", "data")}
    save_model(ModelBundle(model, idf, hyper), args.output)
    elapsed = time.perf_counter() - start
    trained = [n for n in model.nodes if n is not None]
    print(f"trained {args.algo} on {len(dataset)} examples in {elapsed:.2f}s")
    print(f"nodes {tree.num_nodes} labels {tree.num_labels} depth {max(tree.depth)}")
    print(f"node classifiers {len(trained)} constant {sum(n.constant_positive for n in trained)} "
          f"untouched {sum(n.t == 0 for n in trained)}")
    for key, value in sorted(model.stats.items()):
        print(f"{key} {value}")
    return EXIT_OK


def _predictor(bundle: ModelBundle, k: int):
    model = bundle.model
    search = predict_topk if isinstance(model, PltModel) else predict_topk_hsm
    kk = min(k, model.tree.num_labels)

    def run(x):
        if bundle.idf is not None:
            x = tfidf_transform(x, bundle.idf)
        return search(model, x, kk)

    return run


def _predict_all(bundle, dataset, k, threads):
    if dataset.num_features != bundle.model.representation.num_features:
        raise DataError(f"data has {dataset.num_features} features, model expects "
                        f"{bundle.model.representation.num_features}")
    run = _predictor(bundle, k)
    inputs = [ex.features for ex in dataset.examples]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(run, inputs, chunksize=256))
    return [run(x) for x in inputs]


def format_prediction(ranked) -> str:
    return " ".join(f"{j}:{s:.6g}" for j, s in ranked)


def parse_predictions(path) -> list[list[int]]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            try:
                out.append([int(tok.split(":", 1)[0]) for tok in line.split()])
            except ValueError:
                raise DataError(f"{path}: malformed prediction", lineno) from None
    return out


def cmd_predict(args) -> int:
    bundle = load_model(args.model)
    dataset = load_xmlc(args.data)
    results = _predict_all(bundle, dataset, args.k, args.threads)
    text = "".join(format_prediction(r) + "\n" for r in results)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    dataset = load_xmlc(args.data)
    top = max(args.k)
    if args.model:
        preds = [[j for j, _ in r] for r in _predict_all(load_model(args.model), dataset, top, args.threads)]
    else:
        preds = parse_predictions(args.predictions)
        if len(preds) != len(dataset):
            raise DataError(f"{len(preds)} prediction lines for {len(dataset)} examples")
    truth = [ex.labels for ex in dataset.examples]
    rows = {}
    for k in sorted(args.k):
        if any(len(p) < k for p in preds):
            raise DataError(f"some predictions have fewer than {k} labels")
        rows[f"p@{k}"] = mean_precision_at_k(truth, preds, k)
    print(format_report(rows))
    return EXIT_OK


def cmd_tree(args) -> int:
    if args.arity < 2:
        raise UsageError("--arity must be at least 2")
    dataset = load_xmlc(args.data)
    tree = _build_tree(args, dataset, substreams(args.seed)["tree"])
    text = format_tree(tree)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    cost = expected_cost(tree, union_masses(tree, empirical_union_prob(dataset)))
    print(f"nodes {tree.num_nodes} depth {max(tree.depth)} expected-cost {cost:.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    config = SynthConfig(d=args.d, m=args.m, n=args.n, c=args.c, noise_sigma2=args.noise_var, seed=args.seed)
    dataset = GENERATORS[args.model](config)
    save_xmlc(dataset, args.output)
    meta = {"model": args.model, "config": json.loads(config.to_json()), **label_cardinality_stats(dataset)}
    with open(args.output + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(meta, sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    names = list(verify.SUITES) if args.suite == "all" else [args.suite]
    failed = []
    for name in names:
        start = time.perf_counter()
        result = verify.SUITES[name]()
        status = "PASS" if result["passed"] else "FAIL"
        print(f"{status} {name} ({time.perf_counter() - start:.2f}s)")
        for key, value in result.items():
            if key != "passed":
                print(f"  {key} = {value}")
        if not result["passed"]:
            failed.append(name)
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_bench(args) -> int:
    results, tests = experiments.replicate(args.model, args.runs, args.seed, n=args.n, mode=args.mode, l2=args.l2)
    summary = experiments.summarize(args.model, results, tests)
    if args.json:
        for key, value in summary.items():
            print(f"{key}={value}")
    else:
        print(format_report({k: v for k, v in summary.items() if k not in ("model",)},
                            title=f"{args.model}: HSM vs PLT, p@1 x 100"))
    return EXIT_OK


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "eval": cmd_eval, "tree": cmd_tree,
            "synth": cmd_synth, "verify": cmd_verify, "bench": cmd_bench}


def _configure_logging() -> None:
    level = os.environ.get("XT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"xtplt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"xtplt {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ModelFormatError, TreeError, OSError, ValueError) as exc:
        print(f"xtplt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
