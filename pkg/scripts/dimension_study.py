#!/usr/bin/env python3
"""Compare hierarchical search against its own bottom layer across
dimensions: for each d, report the evaluation ratio at the smallest ef
where both configurations reach Recall@1 >= 0.95.

Usage: python3 scripts/dimension_study.py [--n 200000] [--dims 4,8,16,32]
"""

import argparse

import numpy as np

from graphknn import (best_first_search, brute_force_knn,
                      compute_recall_at_1, generate_uniform, hnsw_build)
from graphknn.hnsw import extract_bottom_layer


def run_dim(n, d, n_queries, ef_values):
    data = generate_uniform(n, d, seed=1)
    queries = generate_uniform(n_queries, d, seed=2)
    gt = brute_force_knn(data, queries, 1)
    index = hnsw_build(data, M=16, ef_construction=200, seed=5)
    flat = extract_bottom_layer(index)
    for ef in ef_values:
        stats = {}
        for name in ("hier", "flat"):
            ids = np.empty(n_queries, dtype=np.int64)
            dists = np.empty(n_queries, dtype=np.float64)
            evals = np.empty(n_queries, dtype=np.int64)
            for i in range(n_queries):
                if name == "hier":
                    r, rd, ev, _ = index.search(data, queries.data[i], ef, 1)
                else:
                    r, rd, ev, _ = best_first_search(
                        flat, data, queries.data[i], ef, 1, seed=7,
                        query_index=i)
                ids[i], dists[i], evals[i] = r[0], rd[0], ev
            stats[name] = (compute_recall_at_1(ids, dists, gt),
                           float(np.mean(evals)))
        (r_h, e_h), (r_f, e_f) = stats["hier"], stats["flat"]
        print(f"d={d:<3} ef={ef:<4} hier recall={r_h:.3f} evals={e_h:7.1f} | "
              f"flat recall={r_f:.3f} evals={e_f:7.1f} | "
              f"ratio={e_f / e_h:.3f}")
        if r_h >= 0.95 and r_f >= 0.95:
            print(f"d={d}: operating point ef={ef}, "
                  f"flat/hier evaluation ratio {e_f / e_h:.3f}")
            return
    print(f"d={d}: no ef in the sweep reached recall 0.95 for both")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--queries", type=int, default=1000)
    ap.add_argument("--dims", default="4,8,16,32")
    ap.add_argument("--ef-values", default="2,3,4,6,8,16,32,64,128,256")
    args = ap.parse_args()
    efs = [int(x) for x in args.ef_values.split(",")]
    for d in (int(x) for x in args.dims.split(",")):
        run_dim(args.n, d, args.queries, efs)


if __name__ == "__main__":
    main()
