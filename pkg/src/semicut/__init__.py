"""Balanced cuts and hierarchical clustering on semi-random graphs."""

from .balanced_cut import CutResult, SolverConfig, estimate_alpha, solve_balanced_cut
from .graph_core import Graph, Partition, cut_value
from .hierarchy import ClusterTree, dasgupta_cost, recursive_cluster
from .instance_gen import SemiRandomSpec, generate_hsm, generate_semirandom

__all__ = [
    "ClusterTree", "CutResult", "Graph", "Partition", "SemiRandomSpec", "SolverConfig", "cut_value",
    "dasgupta_cost", "estimate_alpha", "generate_hsm", "generate_semirandom", "recursive_cluster",
    "solve_balanced_cut",
]

__version__ = "0.1.0"
