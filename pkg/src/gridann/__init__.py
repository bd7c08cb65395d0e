"""Grid-partitioned graph index for range-filtered vector search.

Records carry a float vector and numeric attributes; queries combine a
nearest-neighbor target with closed-interval predicates per attribute.  The
index partitions records into a cardinality-balanced grid over the most
selective attributes, builds a fixed-degree proximity graph inside every cell
plus a few cross-cell links per node, and answers queries by walking only the
cells the predicates allow, most promising first.  Large indexes can stay on
disk and stream through memory in scheduled cell batches.
"""

from .core import (Dataset, DistanceMetric, Predicate, RangeQuery,
                   VectorRecord, distance, satisfies, satisfies_mask)
from .grid import (CellAssignment, GridSpec, assign_cells, build_grid,
                   cells_intersecting, partition_segment_counts,
                   select_partition_attributes)
from .quantize import Codebook, dequantize, quantize_vectors
from .histogram import (ClusterHistogram, build_histogram,
                        estimate_cardinalities, kmeans, order_cells)
from .index import (BuildParams, GridGraphIndex, InterCellEdges,
                    IntraCellGraph, build_index, query_cells)
from .search import (SearchParams, SearchResult, SearchState, Workspace,
                     search, search_batch)
from .storage import IndexReader, load_index, save_index
from .schedule import (BatchPlan, IncidenceMatrix, active_count,
                       build_incidence, pack_in_order, schedule_exact,
                       schedule_greedy)
from .streaming import (CostModel, PartialIndex, StreamBudget, StreamResult,
                        assemble_partial_index, run_out_of_core, timeline_csv)
from .oracle import brute_force_search, mean_recall, recall_at_k
from .datagen import (generate_queries, make_clustered_dataset,
                      make_uniform_dataset, measured_selectivity)
from .advisor import CellCountAdvice, advise_cell_count, cost_curve
from .bench import (BenchConfig, BenchRow, bench_ablations, bench_run,
                    bootstrap_std, compute_oracles, rows_to_csv)

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DistanceMetric", "Predicate", "RangeQuery", "VectorRecord",
    "distance", "satisfies", "satisfies_mask",
    "CellAssignment", "GridSpec", "assign_cells", "build_grid",
    "cells_intersecting", "partition_segment_counts",
    "select_partition_attributes",
    "Codebook", "dequantize", "quantize_vectors",
    "ClusterHistogram", "build_histogram", "estimate_cardinalities", "kmeans",
    "order_cells",
    "BuildParams", "GridGraphIndex", "InterCellEdges", "IntraCellGraph",
    "build_index", "query_cells",
    "SearchParams", "SearchResult", "SearchState", "Workspace", "search",
    "search_batch",
    "IndexReader", "load_index", "save_index",
    "BatchPlan", "IncidenceMatrix", "active_count", "build_incidence",
    "pack_in_order", "schedule_exact", "schedule_greedy",
    "CostModel", "PartialIndex", "StreamBudget", "StreamResult",
    "assemble_partial_index", "run_out_of_core", "timeline_csv",
    "brute_force_search", "mean_recall", "recall_at_k",
    "generate_queries", "make_clustered_dataset", "make_uniform_dataset",
    "measured_selectivity",
    "CellCountAdvice", "advise_cell_count", "cost_curve",
    "BenchConfig", "BenchRow", "bench_ablations", "bench_run",
    "bootstrap_std", "compute_oracles", "rows_to_csv",
    "__version__",
]
