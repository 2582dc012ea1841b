"""Semi-supervised learning with harmonic functions on streamed spectral sparsifiers."""
__version__ = "0.1.0"

from .graph import EdgeList, GraphError, WeightedEdge, WeightedGraph, build_graph, canonicalize
from .linalg import (
    ConvergenceError,
    DisconnectedGraphError,
    SolverConfig,
    SolverError,
    effective_resistance_exact,
    estimate_all_resistances,
    solve_laplacian,
)
from .sparsifier import SparsifierParams, SparsifierState, budget_size, sparsify_step, stream_sparsify
from .hfs import (
    HfsSolution,
    LabelAssignment,
    center_labels,
    hfs_dense_oracle,
    predict_classes,
    sparse_hfs,
    stable_hfs,
)
from .knn import Dataset, build_knn_graph
from .datagen import generate_four_clusters, select_labeled_set
from .evaluation import (
    BoundInputs,
    accuracy,
    baseline_1nn,
    baseline_subsampling,
    edge_ratio,
    generalization_bound,
    graph_eigen_extremes,
    spectral_similarity,
)

__all__ = [
    "EdgeList", "GraphError", "WeightedEdge", "WeightedGraph", "build_graph", "canonicalize",
    "ConvergenceError", "DisconnectedGraphError", "SolverConfig", "SolverError",
    "effective_resistance_exact", "estimate_all_resistances", "solve_laplacian",
    "SparsifierParams", "SparsifierState", "budget_size", "sparsify_step", "stream_sparsify",
    "HfsSolution", "LabelAssignment", "center_labels", "hfs_dense_oracle", "predict_classes",
    "sparse_hfs", "stable_hfs", "Dataset", "build_knn_graph", "generate_four_clusters",
    "select_labeled_set", "BoundInputs", "accuracy", "baseline_1nn", "baseline_subsampling",
    "edge_ratio", "generalization_bound", "graph_eigen_extremes", "spectral_similarity",
]
