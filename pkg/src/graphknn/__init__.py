"""Graph-based approximate nearest neighbor search and benchmarking."""

from .bench import (BenchRecord, ExperimentConfig, compute_recall_at_1,
                    run_sweep, run_trajectory_study)
from .core import MetricKind, VectorSet, distance
from .datasets import (GroundTruth, LidEstimate, brute_force_knn,
                       estimate_lid, generate_uniform, read_fvecs,
                       read_ivecs, read_vectors, write_fvecs, write_ivecs,
                       write_vectors)
from .diversify import (add_reverse_edges, dpg_pipeline, dpg_prune,
                        gd_prune, kgraph_gd_pipeline)
from .graphs import NeighborGraph, audit_graph, read_graph, write_graph
from .hnsw import (HnswIndex, assign_level, audit_index,
                   extract_bottom_layer, hnsw_build, load_index, save_index)
from .nndescent import (KnnGraph, NnDescentParams, build_knn_graph,
                        graph_recall)
from .search import (RangeHistogram, SearchTrace, best_first_search,
                     bucket_trace, default_bucket_edges)

__version__ = "0.1.0"
