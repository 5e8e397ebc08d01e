import numpy as np
import pytest

from graphknn import (NnDescentParams, build_knn_graph, generate_uniform,
                      graph_recall, read_graph, write_graph)
from graphknn.errors import UsageError
from graphknn.graphs import audit_graph
from graphknn.nndescent import brute_force_knn_graph


def test_two_vertices():
    vs = generate_uniform(2, 4, seed=1)
    kg = build_knn_graph(vs, 1, seed=0)
    ids0, _ = kg.graph.neighbors(0)
    ids1, _ = kg.graph.neighbors(1)
    assert list(ids0) == [1] and list(ids1) == [0]


def test_small_recall_against_oracle():
    vs = generate_uniform(50, 4, seed=2)
    kg = build_knn_graph(vs, 10, seed=3)
    exact = brute_force_knn_graph(vs, 10)
    assert graph_recall(kg.graph, exact, 10) >= 0.99


def test_structural_invariants():
    vs = generate_uniform(500, 8, seed=4)
    kg = build_knn_graph(vs, 12, seed=5)
    audit_graph(kg.graph, vs)


def test_k_too_large():
    vs = generate_uniform(10, 4, seed=1)
    with pytest.raises(UsageError):
        build_knn_graph(vs, 10)


def test_param_validation():
    with pytest.raises(UsageError):
        NnDescentParams(rho=0.0)
    with pytest.raises(UsageError):
        NnDescentParams(delta=1.0)


def test_monotone_mean_distance():
    vs = generate_uniform(1500, 8, seed=6)
    kg = build_knn_graph(vs, 10, seed=7)
    assert np.all(np.diff(kg.mean_distances) <= 1e-12)


def test_deterministic():
    vs = generate_uniform(800, 4, seed=8)
    a = build_knn_graph(vs, 8, seed=9)
    b = build_knn_graph(vs, 8, seed=9)
    assert np.array_equal(a.graph.ids, b.graph.ids)
    assert np.array_equal(a.graph.dists, b.graph.dists)


def test_graph_recall_identity():
    vs = generate_uniform(300, 4, seed=10)
    exact = brute_force_knn_graph(vs, 8)
    assert graph_recall(exact, exact, 8) == 1.0


def test_random_init_recall_is_low():
    vs = generate_uniform(5000, 8, seed=11)
    params = NnDescentParams(max_iterations=1, delta=0.99)
    # delta=0.99 stops after the first iteration; still far from converged
    kg = build_knn_graph(vs, 10, params, seed=12)
    exact = brute_force_knn_graph(vs, 10)
    converged = build_knn_graph(vs, 10, seed=12)
    assert graph_recall(kg.graph, exact, 10) < graph_recall(
        converged.graph, exact, 10)


def test_file_roundtrip(tmp_path):
    vs = generate_uniform(120, 4, seed=13)
    kg = build_knn_graph(vs, 6, seed=14)
    write_graph(kg.graph, tmp_path / "g.knng")
    back = read_graph(tmp_path / "g.knng")
    assert np.array_equal(back.indptr, kg.graph.indptr)
    assert np.array_equal(back.ids, kg.graph.ids)
    assert np.array_equal(back.dists, kg.graph.dists)
    write_graph(back, tmp_path / "g2.knng")
    assert ((tmp_path / "g.knng").read_bytes()
            == (tmp_path / "g2.knng").read_bytes())
