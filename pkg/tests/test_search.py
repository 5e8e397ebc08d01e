import csv

import numpy as np
import pytest

from graphknn import (VectorSet, best_first_search, brute_force_knn,
                      generate_uniform)
from graphknn.errors import UsageError
from graphknn.graphs import NeighborGraph
from graphknn.nndescent import brute_force_knn_graph
from graphknn.search import (RangeHistogram, SearchTrace, bucket_trace,
                             default_bucket_edges, write_histogram_csv,
                             write_trace_csv)


def _path_graph():
    pts = np.arange(5, dtype=np.float32).reshape(5, 1)
    lists = []
    for v in range(5):
        row = []
        for u in (v - 1, v + 1):
            if 0 <= u < 5:
                row.append((u, abs(v - u) * 1.0))
        row.sort(key=lambda e: (e[1], e[0]))
        lists.append(row)
    return VectorSet(pts), NeighborGraph.from_lists(lists)


def _complete_graph(vs):
    lists = []
    for v in range(vs.n):
        row = [(u, float(np.linalg.norm(vs.data[v] - vs.data[u])))
               for u in range(vs.n) if u != v]
        row.sort(key=lambda e: (e[1], e[0]))
        lists.append(row)
    return NeighborGraph.from_lists(lists)


class TestBestFirst:
    def test_path_walk_from_any_seed(self):
        # the pool is monotone toward the query from every start vertex
        vs, graph = _path_graph()
        q = np.array([3.9], dtype=np.float32)
        for seed in range(10):
            ids, dists, evals, _ = best_first_search(
                graph, vs, q, ef=2, k=2, seed_count=1, seed=seed)
            assert list(ids) == [4, 3]
            assert evals <= 5

    def test_complete_graph_exact(self):
        vs = generate_uniform(40, 3, seed=1)
        graph = _complete_graph(vs)
        queries = generate_uniform(10, 3, seed=2)
        gt = brute_force_knn(vs, queries, 1)
        for i in range(10):
            ids, _, evals, _ = best_first_search(
                graph, vs, queries.data[i], ef=1, k=1, seed_count=1,
                seed=3, query_index=i)
            assert ids[0] == gt.ids[i, 0]
            assert evals == 40

    def test_full_pool_matches_brute_force(self):
        vs = generate_uniform(200, 4, seed=4)
        graph = brute_force_knn_graph(vs, 8)
        queries = generate_uniform(20, 4, seed=5)
        gt = brute_force_knn(vs, queries, 5)
        for i in range(20):
            ids, dists, evals, _ = best_first_search(
                graph, vs, queries.data[i], ef=vs.n, k=5, seed_count=vs.n,
                seed=6, query_index=i)
            assert evals == vs.n
            assert np.array_equal(ids, gt.ids[i])

    def test_no_vertex_evaluated_twice(self):
        vs = generate_uniform(300, 4, seed=7)
        graph = brute_force_knn_graph(vs, 10)
        q = generate_uniform(1, 4, seed=8).data[0]
        _, _, evals, _ = best_first_search(graph, vs, q, ef=64, k=1, seed=9)
        assert evals <= vs.n

    def test_recall_improves_with_ef(self):
        vs = generate_uniform(2000, 8, seed=10)
        graph = brute_force_knn_graph(vs, 10)
        queries = generate_uniform(100, 8, seed=11)
        gt = brute_force_knn(vs, queries, 1)
        recalls = []
        for ef in (1, 8, 64):
            hit = 0
            for i in range(100):
                ids, _, _, _ = best_first_search(
                    graph, vs, queries.data[i], ef=ef, k=1, seed=12,
                    query_index=i)
                hit += ids[0] == gt.ids[i, 0]
            recalls.append(hit / 100)
        assert recalls[0] < recalls[2]
        assert recalls[2] >= 0.95

    def test_deterministic_per_query_index(self):
        vs = generate_uniform(500, 4, seed=13)
        graph = brute_force_knn_graph(vs, 8)
        q = generate_uniform(1, 4, seed=14).data[0]
        a = best_first_search(graph, vs, q, ef=16, k=4, seed=1, query_index=7)
        b = best_first_search(graph, vs, q, ef=16, k=4, seed=1, query_index=7)
        c = best_first_search(graph, vs, q, ef=16, k=4, seed=1, query_index=8)
        assert np.array_equal(a[0], b[0]) and a[2] == b[2]
        # a different query index redraws the seed vertices
        assert a[2] != c[2] or np.array_equal(a[0], c[0])

    def test_argument_validation(self):
        vs, graph = _path_graph()
        q = np.zeros(1, dtype=np.float32)
        with pytest.raises(UsageError):
            best_first_search(graph, vs, q, ef=2, k=3)
        with pytest.raises(UsageError):
            best_first_search(graph, vs, q, ef=2, k=1, seed_count=6)
        with pytest.raises(UsageError):
            best_first_search(graph, vs, q, ef=2, k=1, seed_count=0)


class TestTrace:
    def test_monotone_and_complete(self):
        vs = generate_uniform(400, 4, seed=15)
        graph = brute_force_knn_graph(vs, 8)
        q = generate_uniform(1, 4, seed=16).data[0]
        _, _, evals, trace = best_first_search(
            graph, vs, q, ef=32, k=1, seed=17, record_trace=True)
        assert trace.total_evaluations == evals
        assert len(trace.best_dists) == evals
        assert trace.check_monotone()
        assert trace.terminal_best == trace.best_dists.min()

    def test_bucket_hand_case(self):
        tr = SearchTrace(np.array([3.5, 1.5, 0.5]), 3)
        hist = bucket_trace([tr], np.array([4.0, 2.0, 1.0]))
        assert list(hist.counts) == [1, 2]
        assert hist.total == 3
        assert hist.query_count == 1

    def test_bucket_clamps_outliers(self):
        tr = SearchTrace(np.array([9.0, 0.01]), 2)
        hist = bucket_trace([tr], np.array([4.0, 2.0, 1.0]))
        assert list(hist.counts) == [1, 1]

    def test_edges_must_descend(self):
        tr = SearchTrace(np.array([1.0]), 1)
        with pytest.raises(UsageError):
            bucket_trace([tr], np.array([1.0, 2.0]))

    def test_default_edges_span_first_to_truth(self):
        traces = [SearchTrace(np.array([2.0, 0.5]), 2),
                  SearchTrace(np.array([4.0, 0.6]), 2)]
        edges = default_bucket_edges(traces, np.array([0.4, 0.6]), buckets=10)
        assert len(edges) == 11
        assert edges[0] == pytest.approx(3.0)
        assert edges[-1] == pytest.approx(0.5)
        assert np.all(np.diff(edges) < 0)

    def test_csv_outputs(self, tmp_path):
        traces = [SearchTrace(np.array([2.0, 0.5]), 2)]
        hist = bucket_trace(traces, np.array([4.0, 1.0, 0.25]))
        write_trace_csv(traces, tmp_path / "t.csv")
        write_histogram_csv(hist, tmp_path / "h.csv")
        with open(tmp_path / "t.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["query_id", "evaluation_index", "best_distance"]
        assert len(rows) == 3
        with open(tmp_path / "h.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["bucket_low", "bucket_high", "evaluations"]
        assert sum(int(r[2]) for r in rows[1:]) == 2
