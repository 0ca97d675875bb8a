"""Causal graph learning: score-based search, PC discovery and export."""

from .export import export_dot, graph_from_record, graph_record
from .graph import Dag, Move, Pdag, SepSets, TabuList, markov_equivalent
from .pc import (
    PcResult,
    apply_orientation_rules,
    fisher_z_test,
    numeric_matrix,
    orient_v_structures,
    partial_correlation,
    pc,
    pc_skeleton,
)
from .scores import (
    DiscreteData,
    FamilyScorer,
    bic_family,
    bic_score,
    discretize,
    from_codes,
    k2_family,
    k2_score,
    parameter_count,
)
from .search import SearchResult, hill_climb, neighbor_moves, neighbors, seeded_dag, tabu_search

__all__ = [
    "Dag", "Pdag", "Move", "SepSets", "TabuList", "markov_equivalent",
    "DiscreteData", "FamilyScorer", "discretize", "from_codes", "k2_score", "bic_score",
    "k2_family", "bic_family", "parameter_count",
    "neighbors", "neighbor_moves", "hill_climb", "tabu_search", "seeded_dag", "SearchResult",
    "fisher_z_test", "partial_correlation", "pc_skeleton", "orient_v_structures",
    "apply_orientation_rules", "pc", "PcResult", "numeric_matrix",
    "export_dot", "graph_record", "graph_from_record",
]
