import csv
from pathlib import Path

import numpy as np
import pytest

from graphknn import ExperimentConfig, run_sweep
from graphknn.bench import (CSV_COLUMNS, AlgoSpec, BenchRecord,
                            build_artifacts, compute_recall_at_1,
                            emit_plot_script, load_config_dataset,
                            read_records_csv, run_queries,
                            run_trajectory_study, write_records_csv)
from graphknn.datasets import GroundTruth
from graphknn.errors import UsageError


def _truth(ids, dists):
    ids = np.asarray(ids, dtype=np.int64).reshape(-1, 1)
    dists = np.asarray(dists, dtype=np.float32).reshape(-1, 1)
    return GroundTruth(ids, dists, 0.0)


class TestRecallAt1:
    def test_all_hits(self):
        gt = _truth([3, 5], [0.5, 0.25])
        assert compute_recall_at_1([3, 5], [0.5, 0.25], gt) == 1.0

    def test_half_hits(self):
        gt = _truth([3, 5], [0.5, 0.25])
        assert compute_recall_at_1([3, 9], [0.5, 0.9], gt) == 0.5

    def test_distance_tie_counts_as_hit(self):
        gt = _truth([3], [0.5])
        assert compute_recall_at_1([9], [0.5], gt) == 1.0

    def test_count_mismatch(self):
        gt = _truth([3], [0.5])
        with pytest.raises(UsageError):
            compute_recall_at_1([3, 4], [0.5, 0.5], gt)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.k == 1 and cfg.ef_values[0] == 8

    def test_bad_ef_values(self):
        with pytest.raises(UsageError):
            ExperimentConfig(ef_values=[8, 4])
        with pytest.raises(UsageError):
            ExperimentConfig(ef_values=[0])

    def test_parse_file(self, tmp_path):
        p = tmp_path / "exp.ini"
        p.write_text(
            "[dataset]\nname = toy\nn = 500\nd = 4\nseed = 3\n"
            "queries = 20\nquery_seed = 4\n"
            "[run]\nk = 1\nseed = 9\nef_values = 4, 8\n"
            f"output = {tmp_path / 'out'}\n"
            "[trajectory]\nef = 32\nqueries = 10\n"
            "[algo:hnsw]\nm = 8\nef_construction = 32\n"
            "[algo:kgraph]\nk = 10\n")
        cfg = ExperimentConfig.from_file(p)
        assert cfg.n == 500 and cfg.d == 4 and cfg.seed == 9
        assert cfg.ef_values == [4, 8]
        assert cfg.trajectory_ef == 32 and cfg.trajectory_queries == 10
        assert [a.name for a in cfg.algos] == ["hnsw", "kgraph"]
        assert cfg.algos[0].get_int("m", 16) == 8

    def test_unknown_algo_rejected(self, tmp_path):
        p = tmp_path / "exp.ini"
        p.write_text("[algo:annoy]\n")
        with pytest.raises(UsageError):
            ExperimentConfig.from_file(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(UsageError):
            ExperimentConfig.from_file(tmp_path / "nope.ini")


class TestRecordsCsv:
    def test_roundtrip_exact(self, tmp_path):
        rec = BenchRecord("toy", "hnsw", 16, 1, 0.1 + 0.2, 123.456789012345,
                          7.000000001, 3.5, 100, 0.125)
        write_records_csv([rec], tmp_path / "r.csv")
        back = read_records_csv(tmp_path / "r.csv")
        assert back == [rec]

    def test_header(self, tmp_path):
        write_records_csv([], tmp_path / "r.csv")
        with open(tmp_path / "r.csv") as fh:
            assert next(csv.reader(fh)) == CSV_COLUMNS


def _small_cfg(tmp_path, algos=("brute", "hnsw", "flat-hnsw", "kgraph",
                                "kgraph+gd", "dpg")):
    cfg = ExperimentConfig(dataset_name="toy", n=800, d=4, data_seed=1,
                           n_queries=30, query_seed=2,
                           ef_values=[4, 16], seed=7,
                           output_dir=str(tmp_path / "out"),
                           trajectory_ef=32, trajectory_queries=10)
    cfg.algos = [AlgoSpec(a, {"m": "8", "ef_construction": "32", "k": "10"})
                 for a in algos]
    return cfg


class TestSweep:
    def test_end_to_end(self, tmp_path):
        cfg = _small_cfg(tmp_path)
        records, failures = run_sweep(cfg)
        assert failures == []
        # brute runs once, every other algo once per ef value
        assert len(records) == 1 + 5 * 2
        out = Path(cfg.output_dir)
        assert (out / "results.csv").exists()
        assert (out / "plot_results.py").exists()
        back = read_records_csv(out / "results.csv")
        assert back == records

    def test_brute_is_exact(self, tmp_path):
        cfg = _small_cfg(tmp_path, algos=("brute",))
        records, _ = run_sweep(cfg)
        assert records[0].recall_at_1 == 1.0
        assert records[0].mean_evals == cfg.n
        assert records[0].eval_speedup == 1.0

    def test_graph_methods_beat_scan(self, tmp_path):
        cfg = _small_cfg(tmp_path, algos=("hnsw", "kgraph+gd"))
        records, failures = run_sweep(cfg)
        assert failures == []
        for rec in records:
            assert rec.mean_evals < cfg.n
            assert rec.eval_speedup > 1.0
        best = {r.algo: max(x.recall_at_1 for x in records
                            if x.algo == r.algo) for r in records}
        assert all(v >= 0.9 for v in best.values())

    def test_shared_artifacts_reused(self, tmp_path):
        cfg = _small_cfg(tmp_path, algos=("hnsw", "flat-hnsw"))
        data, queries = load_config_dataset(cfg)
        arts = build_artifacts(cfg, data)
        assert arts.index is not None and arts.flat_hnsw is not None
        ids, dists, evals, traces, wall = run_queries(
            "flat-hnsw", arts, data, queries, 16, 1, cfg.seed)
        assert len(ids) == queries.n and traces is None

    def test_failure_isolation(self, tmp_path, monkeypatch):
        cfg = _small_cfg(tmp_path, algos=("brute", "hnsw"))
        import graphknn.bench as bench_mod

        def boom(*a, **kw):
            raise RuntimeError("forced")
        monkeypatch.setattr(bench_mod.HnswIndex, "search", boom)
        records, failures = run_sweep(cfg)
        assert [r.algo for r in records] == ["brute"]
        assert failures and failures[0][0] == "hnsw"
        assert (Path(cfg.output_dir) / "failures.txt").exists()

    def test_no_algos_rejected(self, tmp_path):
        cfg = _small_cfg(tmp_path, algos=())
        with pytest.raises(UsageError):
            run_sweep(cfg)


class TestTrajectory:
    def test_outputs_and_mass(self, tmp_path):
        cfg = _small_cfg(tmp_path, algos=("hnsw", "flat-hnsw", "kgraph+gd"))
        hists, traces = run_trajectory_study(cfg)
        out = Path(cfg.output_dir)
        for algo in ("hnsw", "flat_hnsw", "kgraph_gd"):
            assert (out / f"trajectory_{algo}.csv").exists()
            assert (out / f"traces_{algo}.csv").exists()
        for algo, hist in hists.items():
            assert hist.query_count == cfg.trajectory_queries
            total_evals = sum(t.total_evaluations for t in traces[algo])
            assert hist.total == total_evals


def test_plot_script_is_selfcontained(tmp_path):
    emit_plot_script(tmp_path / "plot.py")
    text = (tmp_path / "plot.py").read_text()
    assert "matplotlib" in text
    compile(text, "plot.py", "exec")
    assert "graphknn" not in text
