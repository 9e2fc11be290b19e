"""Conflict graph design for randomized experiments under network interference."""

from .graph import Graph, from_edge_list, largest_eigenvalue, power_graph_two
from .estimand import Estimand, build_conflict_graph
from .ordering import ImportanceOrdering, eigenvector_ordering, sequential_degree_ordering
from .design import ConflictGraphDesign, DesignParams
from .estimator import OutcomeTable, estimate, modified_ht, standard_ht

__all__ = [
    "Graph", "from_edge_list", "largest_eigenvalue", "power_graph_two",
    "Estimand", "build_conflict_graph",
    "ImportanceOrdering", "eigenvector_ordering", "sequential_degree_ordering",
    "ConflictGraphDesign", "DesignParams",
    "OutcomeTable", "estimate", "modified_ht", "standard_ht",
]
