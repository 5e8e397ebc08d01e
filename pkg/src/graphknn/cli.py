"""Command-line front end.

Pipeline stages map one-to-one onto subcommands so every intermediate
artifact (raw k-NN graph, diversified graph, index) can be inspected and
swapped: `build --algo kgraph` then `build --algo gd` is the hybrid
diversified-flat-graph configuration.

Exit codes: 0 ok, 1 audit violation, 2 usage error, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .bench import ExperimentConfig, run_sweep, run_trajectory_study
from .core import MetricKind, VectorSet
from .datasets import (brute_force_knn, estimate_lid, generate_uniform,
                       read_vectors, write_ground_truth, write_metadata,
                       write_vectors)
from .diversify import add_reverse_edges, dpg_prune, gd_prune
from .errors import AuditError, FormatError, UsageError
from .graphs import audit_graph, read_graph, write_graph
from .hnsw import audit_index, hnsw_build, load_index, save_index
from .nndescent import NnDescentParams, build_knn_graph
from .search import best_first_search

EXIT_OK = 0
EXIT_AUDIT = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graphknn",
                                description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--threads", type=int, default=1,
                   help="worker count (1 is the timing default)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic uniform .fvecs dataset")
    g.add_argument("--n", type=int, required=True, help="vector count")
    g.add_argument("--d", type=int, required=True, help="dimension")
    g.add_argument("--seed", type=int, default=0, help="generator seed")
    g.add_argument("--metric", default="l2", help="l2 or cosine")
    g.add_argument("--out", required=True, help="output .fvecs path")

    g = sub.add_parser("gt", help="write exact ground truth (.ivecs/.fvecs)")
    g.add_argument("--base", required=True, help="candidate .fvecs file")
    g.add_argument("--queries", required=True, help="query .fvecs file")
    g.add_argument("--k", type=int, default=1, help="neighbors per query")
    g.add_argument("--metric", default="l2", help="l2 or cosine")
    g.add_argument("--out", required=True, help="output stem")

    g = sub.add_parser("lid", help="print the MLE intrinsic dimension")
    g.add_argument("--base", required=True, help="dataset .fvecs file")
    g.add_argument("--k", type=int, default=400, help="neighborhood size")
    g.add_argument("--sample", type=int, default=None, help="anchor count")
    g.add_argument("--seed", type=int, default=0, help="sampling seed")
    g.add_argument("--metric", default="l2", help="l2 or cosine")

    g = sub.add_parser("build", help="build a graph or index artifact")
    g.add_argument("--algo", required=True,
                   choices=["kgraph", "gd", "dpg", "hnsw"],
                   help="artifact kind")
    g.add_argument("--base", required=True, help="dataset .fvecs file")
    g.add_argument("--metric", default="l2", help="l2 or cosine")
    g.add_argument("--out", required=True, help="output artifact path")
    g.add_argument("--k", type=int, default=40,
                   help="k-NN graph degree (kgraph)")
    g.add_argument("--rho", type=float, default=0.5,
                   help="candidate sample rate (kgraph)")
    g.add_argument("--delta", type=float, default=0.001,
                   help="termination threshold (kgraph)")
    g.add_argument("--max-iters", type=int, default=30,
                   help="iteration cap (kgraph)")
    g.add_argument("--graph", default=None,
                   help="source k-NN graph file (gd/dpg)")
    g.add_argument("--no-reverse", action="store_true",
                   help="skip the reverse-neighbor union (gd/dpg)")
    g.add_argument("--m", type=int, default=16, help="degree target (hnsw)")
    g.add_argument("--ef-construction", type=int, default=200,
                   help="build pool size (hnsw)")
    g.add_argument("--seed", type=int, default=0, help="build seed")

    g = sub.add_parser("search", help="query a built artifact")
    g.add_argument("--base", required=True, help="dataset .fvecs file")
    g.add_argument("--metric", default="l2", help="l2 or cosine")
    g.add_argument("--graph", default=None, help="flat graph artifact")
    g.add_argument("--index", default=None, help="hnsw index artifact")
    g.add_argument("--queries", required=True, help="query .fvecs file")
    g.add_argument("--ef", type=int, default=64, help="search pool size")
    g.add_argument("--k", type=int, default=1, help="results per query")
    g.add_argument("--seed", type=int, default=0, help="random-seed base")
    g.add_argument("--seed-count", type=int, default=None,
                   help="random starting points (defaults to ef)")

    g = sub.add_parser("bench", help="run an ef sweep from a config file")
    g.add_argument("--config", required=True, help="experiment config file")

    g = sub.add_parser("trajectory",
                       help="run the 50-query trace study from a config file")
    g.add_argument("--config", required=True, help="experiment config file")

    g = sub.add_parser("audit",
                       help="validate structural invariants of an artifact")
    g.add_argument("--base", required=True, help="dataset .fvecs file")
    g.add_argument("--metric", default="l2", help="l2 or cosine")
    g.add_argument("--graph", default=None, help="flat graph artifact")
    g.add_argument("--index", default=None, help="hnsw index artifact")
    return p


def _load_base(args) -> VectorSet:
    return read_vectors(args.base, metric=MetricKind.parse(args.metric))


def _cmd_gen(args) -> int:
    vs = generate_uniform(args.n, args.d, args.seed,
                          metric=MetricKind.parse(args.metric))
    write_vectors(vs, args.out)
    write_metadata(vs, str(args.out) + ".meta")
    return EXIT_OK


def _cmd_gt(args) -> int:
    data = _load_base(args)
    queries = read_vectors(args.queries,
                           metric=MetricKind.parse(args.metric))
    gt = brute_force_knn(data, queries, args.k)
    write_ground_truth(gt, args.out)
    print(f"wrote ground truth for {queries.n} queries "
          f"(exhaustive scan {gt.scan_seconds:.3f}s)")
    return EXIT_OK


def _cmd_lid(args) -> int:
    data = _load_base(args)
    est = estimate_lid(data, k_neighbors=args.k, sample_size=args.sample,
                       seed=args.seed)
    print(f"lid={est.value:.4f} k={est.k_neighbors} "
          f"sample={est.sample_size}")
    return EXIT_OK


def _cmd_build(args) -> int:
    data = _load_base(args)
    if args.algo == "kgraph":
        kg = build_knn_graph(data, args.k,
                             NnDescentParams(args.rho, args.delta,
                                             args.max_iters),
                             seed=args.seed)
        write_graph(kg.graph, args.out)
        print(f"kgraph: K={args.k} iterations={kg.iterations} "
              f"evaluations={kg.evaluations}")
    elif args.algo in ("gd", "dpg"):
        if not args.graph:
            raise UsageError(f"--algo {args.algo} requires --graph "
                             "(a source k-NN graph)")
        src = read_graph(args.graph)
        pruned = (gd_prune if args.algo == "gd" else dpg_prune)(src, data)
        if not args.no_reverse:
            pruned = add_reverse_edges(pruned)
        write_graph(pruned, args.out)
        print(f"{args.algo}: max degree {pruned.max_degree()}")
    else:
        index = hnsw_build(data, M=args.m,
                           ef_construction=args.ef_construction,
                           seed=args.seed)
        save_index(index, args.out)
        print(f"hnsw: M={args.m} max level={index.max_level} "
              f"build evaluations={index.build_evaluations}")
    return EXIT_OK


def _cmd_search(args) -> int:
    if bool(args.graph) == bool(args.index):
        raise UsageError("pass exactly one of --graph or --index")
    data = _load_base(args)
    queries = read_vectors(args.queries,
                           metric=MetricKind.parse(args.metric))
    if args.index:
        index = load_index(args.index, data)
        for i in range(queries.n):
            ids, dists, evals, _ = index.search(data, queries.data[i],
                                                args.ef, args.k)
            row = " ".join(f"{v}:{d:.6f}" for v, d in zip(ids, dists))
            print(f"query {i}: {row} (evaluations {evals})")
    else:
        graph = read_graph(args.graph)
        for i in range(queries.n):
            ids, dists, evals, _ = best_first_search(
                graph, data, queries.data[i], args.ef, args.k,
                seed_count=args.seed_count, seed=args.seed, query_index=i)
            row = " ".join(f"{v}:{d:.6f}" for v, d in zip(ids, dists))
            print(f"query {i}: {row} (evaluations {evals})")
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    records, failures = run_sweep(cfg)
    for rec in records:
        print(f"{rec.dataset} {rec.algo} ef={rec.ef} "
              f"recall@1={rec.recall_at_1:.4f} "
              f"mean_evals={rec.mean_evals:.1f}")
    for algo, err in failures:
        print(f"FAILED {algo}: {err}", file=sys.stderr)
    return EXIT_OK


def _cmd_trajectory(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    hists, _ = run_trajectory_study(cfg)
    for algo, hist in hists.items():
        print(f"{algo}: total evaluations {hist.total} over "
              f"{hist.query_count} queries")
    return EXIT_OK


def _cmd_audit(args) -> int:
    if bool(args.graph) == bool(args.index):
        raise UsageError("pass exactly one of --graph or --index")
    data = _load_base(args)
    try:
        if args.graph:
            graph = read_graph(args.graph)
            audit_graph(graph, data)
            print(f"graph ok: n={graph.n} max degree {graph.max_degree()}")
        else:
            index = load_index(args.index, data)
            audit_index(index, data)
            print(f"index ok: n={index.count} max level {index.max_level}")
    except AuditError as exc:
        print(f"audit violation: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


_HANDLERS = {
    "gen": _cmd_gen,
    "gt": _cmd_gt,
    "lid": _cmd_lid,
    "build": _cmd_build,
    "search": _cmd_search,
    "bench": _cmd_bench,
    "trajectory": _cmd_trajectory,
    "audit": _cmd_audit,
}


def run_command(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
