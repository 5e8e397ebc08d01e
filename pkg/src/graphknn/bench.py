"""Experiment harness: ef sweeps producing recall-vs-speedup tables and
distance-range trajectory histograms, with CSV and plot-script emission.

All timed query loops run sequentially.  Wall speedups are reported
against a fresh exhaustive scan in the same process using the same
compiled distance kernel; evaluation-count speedups (n / mean
evaluations) are the machine-independent quantity.
"""

from __future__ import annotations

import configparser
import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K_
from .core import MetricKind, VectorSet
from .datasets import (GroundTruth, brute_force_knn, generate_uniform,
                       read_ground_truth, read_vectors, write_ground_truth)
from .diversify import dpg_pipeline, kgraph_gd_pipeline
from .errors import UsageError
from .graphs import NeighborGraph
from .hnsw import HnswIndex, extract_bottom_layer, hnsw_build
from .nndescent import NnDescentParams, build_knn_graph
from .search import (RangeHistogram, SearchTrace, best_first_search,
                     bucket_trace, default_bucket_edges, write_histogram_csv,
                     write_trace_csv)

KNOWN_ALGOS = ("brute", "hnsw", "flat-hnsw", "kgraph", "kgraph+gd", "dpg")

CSV_COLUMNS = ["dataset", "algo", "ef", "k", "recall_at_1", "mean_evals",
               "eval_speedup", "wall_speedup", "query_count", "build_seconds"]
# columns allowed to differ between reruns of the same config+seed
WALL_CLOCK_COLUMNS = ("wall_speedup", "build_seconds")


@dataclass
class BenchRecord:
    dataset: str
    algo: str
    ef: int
    k: int
    recall_at_1: float
    mean_evals: float
    eval_speedup: float
    wall_speedup: float
    query_count: int
    build_seconds: float

    def row(self):
        return [self.dataset, self.algo, self.ef, self.k,
                repr(self.recall_at_1), repr(self.mean_evals),
                repr(self.eval_speedup), repr(self.wall_speedup),
                self.query_count, repr(self.build_seconds)]


@dataclass
class AlgoSpec:
    name: str
    params: dict = field(default_factory=dict)

    def get_int(self, key, default):
        return int(self.params.get(key, default))


@dataclass
class ExperimentConfig:
    dataset_name: str = "dataset"
    metric: MetricKind = MetricKind.L2
    # synthetic generation (used when base_path is None)
    n: int = 10000
    d: int = 8
    data_seed: int = 1
    n_queries: int = 100
    query_seed: int = 2
    # or file-backed
    base_path: str | None = None
    query_path: str | None = None
    ground_truth_stem: str | None = None
    # run parameters
    algos: list = field(default_factory=list)
    ef_values: list = field(default_factory=lambda: [8, 16, 32, 64, 128,
                                                     256, 512])
    k: int = 1
    seed: int = 42
    output_dir: str = "bench_out"
    trajectory_ef: int = 256
    trajectory_queries: int = 50

    def __post_init__(self):
        efs = list(self.ef_values)
        if any(e <= 0 for e in efs) or efs != sorted(efs):
            raise UsageError("ef values must be positive and ascending")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise UsageError(f"config file {path} does not exist")
        cp = configparser.ConfigParser()
        cp.read(path)
        cfg = cls()
        if cp.has_section("dataset"):
            ds = cp["dataset"]
            cfg.dataset_name = ds.get("name", cfg.dataset_name)
            cfg.metric = MetricKind.parse(ds.get("metric", "l2"))
            cfg.n = ds.getint("n", cfg.n)
            cfg.d = ds.getint("d", cfg.d)
            cfg.data_seed = ds.getint("seed", cfg.data_seed)
            cfg.n_queries = ds.getint("queries", cfg.n_queries)
            cfg.query_seed = ds.getint("query_seed", cfg.query_seed)
            cfg.base_path = ds.get("base", None)
            cfg.query_path = ds.get("queries_file", None)
            cfg.ground_truth_stem = ds.get("ground_truth", None)
        if cp.has_section("run"):
            run = cp["run"]
            cfg.k = run.getint("k", cfg.k)
            cfg.seed = run.getint("seed", cfg.seed)
            cfg.output_dir = run.get("output", cfg.output_dir)
            if run.get("ef_values"):
                cfg.ef_values = [int(x) for x in
                                 run.get("ef_values").split(",")]
        if cp.has_section("trajectory"):
            tj = cp["trajectory"]
            cfg.trajectory_ef = tj.getint("ef", cfg.trajectory_ef)
            cfg.trajectory_queries = tj.getint("queries",
                                               cfg.trajectory_queries)
        for section in cp.sections():
            if section.startswith("algo:"):
                name = section.split(":", 1)[1]
                if name not in KNOWN_ALGOS:
                    raise UsageError(f"unknown algorithm {name!r}")
                cfg.algos.append(AlgoSpec(name, dict(cp[section])))
        for p in (cfg.base_path, cfg.query_path):
            if p is not None and not Path(p).exists():
                raise UsageError(f"referenced file {p} does not exist")
        cfg.__post_init__()
        return cfg


def compute_recall_at_1(result_ids, result_dists, truth: GroundTruth,
                        rel_tol: float = 1e-6) -> float:
    """Fraction of queries whose top-1 matches the true top-1 by id or by
    distance within rel_tol relative (tie equivalence)."""
    result_ids = np.asarray(result_ids)
    result_dists = np.asarray(result_dists, dtype=np.float64)
    if len(result_ids) != truth.nq:
        raise UsageError("result count does not match query count")
    true_ids = truth.ids[:, 0]
    true_d = truth.dists[:, 0].astype(np.float64)
    id_hit = result_ids == true_ids
    dist_hit = np.abs(result_dists - true_d) <= rel_tol * np.maximum(
        1.0, np.abs(true_d))
    return float(np.mean(id_hit | dist_hit))


@dataclass
class _BuiltArtifacts:
    index: HnswIndex | None = None
    hnsw_seconds: float = 0.0
    kgraph: NeighborGraph | None = None
    kgraph_seconds: float = 0.0
    flat_hnsw: NeighborGraph | None = None
    gd: NeighborGraph | None = None
    gd_seconds: float = 0.0
    dpg: NeighborGraph | None = None
    dpg_seconds: float = 0.0


def load_config_dataset(cfg: ExperimentConfig):
    """Materialize (data, queries) from the config."""
    if cfg.base_path:
        data = read_vectors(cfg.base_path, metric=cfg.metric)
        if not cfg.query_path:
            raise UsageError("file-backed dataset requires queries_file")
        queries = read_vectors(cfg.query_path, metric=cfg.metric)
    else:
        data = generate_uniform(cfg.n, cfg.d, cfg.data_seed,
                                metric=cfg.metric, name=cfg.dataset_name)
        queries = generate_uniform(cfg.n_queries, cfg.d, cfg.query_seed,
                                   metric=cfg.metric)
        if cfg.metric is MetricKind.COSINE:
            data = data.normalize()
            queries = queries.normalize()
    return data, queries


def _ground_truth(cfg: ExperimentConfig, data, queries) -> GroundTruth:
    if cfg.ground_truth_stem:
        stem = Path(cfg.ground_truth_stem)
        if stem.with_suffix(".ivecs").exists():
            return read_ground_truth(stem)
        gt = brute_force_knn(data, queries, max(cfg.k, 1))
        write_ground_truth(gt, stem)
        return gt
    return brute_force_knn(data, queries, max(cfg.k, 1))


def build_artifacts(cfg: ExperimentConfig, data: VectorSet,
                    algo_names=None) -> _BuiltArtifacts:
    """Build every index/graph the configured algorithms need, sharing
    the base k-NN graph and the HNSW index between derived methods."""
    arts = _BuiltArtifacts()
    specs = {a.name: a for a in cfg.algos}
    names = set(algo_names if algo_names is not None else specs)
    need_hnsw = names & {"hnsw", "flat-hnsw"}
    need_kgraph = names & {"kgraph", "kgraph+gd", "dpg"}
    if need_hnsw:
        spec = specs.get("hnsw") or specs.get("flat-hnsw") or AlgoSpec("hnsw")
        t0 = time.perf_counter()
        arts.index = hnsw_build(data,
                                M=spec.get_int("m", 16),
                                ef_construction=spec.get_int(
                                    "ef_construction", 200),
                                seed=cfg.seed)
        arts.hnsw_seconds = time.perf_counter() - t0
        if "flat-hnsw" in names:
            arts.flat_hnsw = extract_bottom_layer(arts.index)
    if need_kgraph:
        spec = (specs.get("kgraph") or specs.get("kgraph+gd")
                or specs.get("dpg") or AlgoSpec("kgraph"))
        t0 = time.perf_counter()
        kg = build_knn_graph(data, spec.get_int("k", 40),
                             NnDescentParams(), seed=cfg.seed)
        arts.kgraph = kg.graph
        arts.kgraph_seconds = time.perf_counter() - t0
        if "kgraph+gd" in names:
            t0 = time.perf_counter()
            arts.gd = kgraph_gd_pipeline(arts.kgraph, data)
            arts.gd_seconds = arts.kgraph_seconds + (time.perf_counter() - t0)
        if "dpg" in names:
            t0 = time.perf_counter()
            arts.dpg = dpg_pipeline(arts.kgraph, data)
            arts.dpg_seconds = arts.kgraph_seconds + (time.perf_counter() - t0)
    return arts


def _flat_graph_for(arts: _BuiltArtifacts, name: str) -> NeighborGraph:
    return {"flat-hnsw": arts.flat_hnsw, "kgraph": arts.kgraph,
            "kgraph+gd": arts.gd, "dpg": arts.dpg}[name]


def _build_seconds_for(arts: _BuiltArtifacts, name: str) -> float:
    return {"hnsw": arts.hnsw_seconds, "flat-hnsw": arts.hnsw_seconds,
            "kgraph": arts.kgraph_seconds, "kgraph+gd": arts.gd_seconds,
            "dpg": arts.dpg_seconds, "brute": 0.0}[name]


def exhaustive_scan_seconds(data: VectorSet, queries: VectorSet) -> float:
    """Time a sequential full scan over all queries (top-1)."""
    code = data.metric.code
    # warm the kernel outside the timed region
    K_.full_scan_top1(data.data[:2], queries.data[0], code)
    t0 = time.perf_counter()
    for i in range(queries.n):
        K_.full_scan_top1(data.data, queries.data[i], code)
    return time.perf_counter() - t0


def run_queries(algo: str, arts: _BuiltArtifacts, data: VectorSet,
                queries: VectorSet, ef: int, k: int, seed: int,
                record_trace: bool = False):
    """Sequential query loop; returns (ids, dists, evals, traces, wall)."""
    nq = queries.n
    top_ids = np.empty(nq, dtype=np.int64)
    top_dists = np.empty(nq, dtype=np.float64)
    evals = np.empty(nq, dtype=np.int64)
    traces = [] if record_trace else None
    t0 = time.perf_counter()
    if algo == "brute":
        for i in range(nq):
            bid, bd = K_.full_scan_top1(data.data, queries.data[i],
                                        data.metric.code)
            top_ids[i], top_dists[i], evals[i] = bid, bd, data.n
    elif algo == "hnsw":
        for i in range(nq):
            ids, dd, ev, tr = arts.index.search(data, queries.data[i], ef, k,
                                                record_trace=record_trace)
            top_ids[i] = ids[0] if len(ids) else -1
            top_dists[i] = dd[0] if len(dd) else np.inf
            evals[i] = ev
            if record_trace:
                traces.append(tr)
    else:
        graph = _flat_graph_for(arts, algo)
        for i in range(nq):
            ids, dd, ev, tr = best_first_search(
                graph, data, queries.data[i], ef, k, seed=seed,
                query_index=i, record_trace=record_trace)
            top_ids[i] = ids[0] if len(ids) else -1
            top_dists[i] = dd[0] if len(dd) else np.inf
            evals[i] = ev
            if record_trace:
                traces.append(tr)
    wall = time.perf_counter() - t0
    return top_ids, top_dists, evals, traces, wall


def run_sweep(cfg: ExperimentConfig, data=None, queries=None, gt=None,
              arts=None):
    """Run the configured ef sweep; returns records and writes CSVs."""
    if not cfg.algos:
        raise UsageError("no algorithms configured")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if data is None or queries is None:
        data, queries = load_config_dataset(cfg)
    if gt is None:
        gt = _ground_truth(cfg, data, queries)
    if arts is None:
        arts = build_artifacts(cfg, data)
    exh_seconds = exhaustive_scan_seconds(data, queries)
    records = []
    failures = []
    for spec in cfg.algos:
        algo = spec.name
        try:
            for ef in ([0] if algo == "brute" else cfg.ef_values):
                ids, dists, evals, _, wall = run_queries(
                    algo, arts, data, queries, ef, cfg.k, cfg.seed)
                rec = BenchRecord(
                    dataset=cfg.dataset_name, algo=algo, ef=ef, k=cfg.k,
                    recall_at_1=compute_recall_at_1(ids, dists, gt),
                    mean_evals=float(np.mean(evals)),
                    eval_speedup=data.n / float(np.mean(evals)),
                    wall_speedup=exh_seconds / wall if wall > 0 else 0.0,
                    query_count=queries.n,
                    build_seconds=_build_seconds_for(arts, algo))
                records.append(rec)
        except Exception as exc:  # noqa: BLE001 - continue other algos
            failures.append((algo, repr(exc)))
    write_records_csv(records, out / "results.csv")
    emit_plot_script(out / "plot_results.py")
    if failures:
        (out / "failures.txt").write_text(
            "\n".join(f"{a}: {e}" for a, e in failures) + "\n")
    return records, failures


def run_trajectory_study(cfg: ExperimentConfig, bucket_edges=None,
                         data=None, queries=None, gt=None, arts=None):
    """50-query trace study for hnsw, flat-hnsw and kgraph+gd; emits one
    histogram CSV per method and returns the histograms."""
    methods = ["hnsw", "flat-hnsw", "kgraph+gd"]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if data is None or queries is None:
        data, queries = load_config_dataset(cfg)
    nq = min(cfg.trajectory_queries, queries.n)
    queries = VectorSet(queries.data[:nq], metric=queries.metric)
    if gt is None:
        gt = brute_force_knn(data, queries, 1)
    if arts is None:
        if not cfg.algos:
            cfg.algos = [AlgoSpec(m) for m in methods]
        arts = build_artifacts(cfg, data, algo_names=methods)
    ef = cfg.trajectory_ef
    all_traces = {}
    for algo in methods:
        _, _, _, traces, _ = run_queries(algo, arts, data, queries, ef, 1,
                                         cfg.seed, record_trace=True)
        all_traces[algo] = traces
    if bucket_edges is None:
        pooled = [t for ts in all_traces.values() for t in ts]
        bucket_edges = default_bucket_edges(pooled, gt.dists[:, 0])
    hists = {}
    for algo in methods:
        hist = bucket_trace(all_traces[algo], bucket_edges)
        hists[algo] = hist
        tag = algo.replace("+", "_").replace("-", "_")
        write_histogram_csv(hist, out / f"trajectory_{tag}.csv")
        write_trace_csv(all_traces[algo], out / f"traces_{tag}.csv")
    return hists, all_traces


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for rec in records:
            wr.writerow(rec.row())


def read_records_csv(path) -> list:
    records = []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        for row in rd:
            records.append(BenchRecord(
                dataset=row["dataset"], algo=row["algo"],
                ef=int(row["ef"]), k=int(row["k"]),
                recall_at_1=float(row["recall_at_1"]),
                mean_evals=float(row["mean_evals"]),
                eval_speedup=float(row["eval_speedup"]),
                wall_speedup=float(row["wall_speedup"]),
                query_count=int(row["query_count"]),
                build_seconds=float(row["build_seconds"])))
    return records


_PLOT_SCRIPT = '''\
#!/usr/bin/env python3
"""Render recall-vs-speedup curves and trajectory histograms from the
CSV files emitted next to this script."""
import csv
import glob
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))

results = os.path.join(here, "results.csv")
if os.path.exists(results):
    rows = list(csv.DictReader(open(results)))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    algos = sorted({r["algo"] for r in rows if r["algo"] != "brute"})
    for algo in algos:
        pts = [(float(r["eval_speedup"]), float(r["recall_at_1"]))
               for r in rows if r["algo"] == algo]
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker="o", label=algo)
    ax.set_xscale("log")
    ax.set_xlabel("speedup over exhaustive search (n / mean comparisons)")
    ax.set_ylabel("Recall@1")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(os.path.join(here, "recall_vs_speedup.png"), dpi=150)

for path in sorted(glob.glob(os.path.join(here, "trajectory_*.csv"))):
    rows = list(csv.DictReader(open(path)))
    name = os.path.basename(path)[len("trajectory_"):-len(".csv")]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    mids = [(float(r["bucket_low"]) + float(r["bucket_high"])) / 2
            for r in rows]
    counts = [int(r["evaluations"]) for r in rows]
    ax.bar(range(len(counts)), counts)
    ax.set_xticks(range(len(counts)))
    ax.set_xticklabels([f"{m:.3g}" for m in mids], rotation=45)
    ax.set_xlabel("distance range (bucket midpoint, far to near)")
    ax.set_ylabel("comparisons")
    ax.set_title(name)
    fig.tight_layout()
    fig.savefig(os.path.join(here, f"trajectory_{name}.png"), dpi=150)
print("plots written to", here)
'''


def emit_plot_script(path) -> None:
    Path(path).write_text(_PLOT_SCRIPT)
