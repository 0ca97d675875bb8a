"""Score-based structure search: greedy hill climbing and tabu search."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

from ..errors import GraphError
from .graph import Dag, Move, TabuList
from .scores import MAX_PARENTS, DiscreteData, FamilyScorer

log = logging.getLogger(__name__)


def neighbor_moves(dag: Dag, max_parents: int = MAX_PARENTS) -> list[Move]:
    """Every legal single-edge change, in a fixed order: additions, removals, reversals."""
    moves: list[Move] = []
    nodes = dag.nodes
    for a in nodes:
        for b in nodes:
            if a == b or dag.has_edge(a, b) or dag.has_edge(b, a):
                continue
            if len(dag.parents(b)) >= max_parents or dag.reaches(b, a):
                continue
            moves.append(Move("add", (a, b)))
    edges = dag.edges()
    moves.extend(Move("remove", e) for e in edges)
    for a, b in edges:
        if len(dag.parents(a)) >= max_parents:
            continue
        # reversal is acyclic unless another path a ~> b exists
        dag.remove_edge(a, b)
        ok = not dag.reaches(a, b)
        dag.add_edge(a, b)
        if ok:
            moves.append(Move("reverse", (a, b)))
    return moves


def neighbors(dag: Dag, max_parents: int = MAX_PARENTS) -> list[tuple[Move, Dag]]:
    return [(m, dag.apply(m)) for m in neighbor_moves(dag, max_parents)]


@dataclass
class SearchResult:
    dag: Dag
    score: float
    init_score: float
    trajectory: list[float]
    moves: list[Move]
    iterations: int
    algorithm: str
    stopped: str = ""
    diagnostics: dict = field(default_factory=dict)


def _tolerance(score: float) -> float:
    return 1e-9 * max(1.0, abs(score))


def _prepare(data: DiscreteData, init: Dag | None) -> Dag:
    if init is None:
        return Dag(data.names)
    missing = set(init.nodes) - set(data.names)
    if missing:
        raise GraphError(f"graph nodes missing from data: {sorted(missing)}")
    if not init.is_acyclic():
        raise GraphError("initial graph has a cycle")
    return init.copy()


def hill_climb(
    data: DiscreteData,
    init: Dag | None = None,
    score: str = "k2",
    max_iter: int = 1000,
    max_parents: int = MAX_PARENTS,
) -> SearchResult:
    """Apply the best strictly improving single-edge move until none is left.

    Ties between equally good moves go to the first in :func:`neighbor_moves` order.
    """
    scorer = FamilyScorer(data, score, max_parents)
    dag = _prepare(data, init)
    current = scorer.total(dag)
    result = SearchResult(dag, current, current, [current], [], 0, "hc")
    for it in range(1, max_iter + 1):
        result.iterations = it
        best_move, best_delta = None, _tolerance(current)
        for move in neighbor_moves(dag, max_parents):
            d = scorer.delta(dag, move)
            if d > best_delta:
                best_move, best_delta = move, d
        if best_move is None:
            result.stopped = "local optimum"
            break
        dag = dag.apply(best_move)
        current = scorer.total(dag)
        result.moves.append(best_move)
        result.trajectory.append(current)
    else:
        result.stopped = "max_iter"
    result.dag, result.score = dag, current
    result.diagnostics["cached_families"] = scorer.cache_size
    return result


def tabu_search(
    data: DiscreteData,
    init: Dag | None = None,
    score: str = "bic",
    tabu_capacity: int = 50,
    max_iter: int = 1000,
    patience: int = 20,
    max_parents: int = MAX_PARENTS,
) -> SearchResult:
    """Best-neighbour walk that may accept worsening moves.

    Moves that would undo one of the last ``tabu_capacity`` moves are skipped
    unless they reach a score above the best seen so far. The search stops
    after ``patience`` consecutive moves without a new best and returns the
    best graph encountered.
    """
    if patience < 1:
        raise GraphError("patience must be positive")
    scorer = FamilyScorer(data, score, max_parents)
    dag = _prepare(data, init)
    current = scorer.total(dag)
    best_dag, best = dag, current
    tabu = TabuList(tabu_capacity)
    result = SearchResult(dag, current, current, [current], [], 0, "tabu")
    stale = 0
    for it in range(1, max_iter + 1):
        result.iterations = it
        chosen, chosen_delta = None, -float("inf")
        for move in neighbor_moves(dag, max_parents):
            d = scorer.delta(dag, move)
            if tabu.forbids(move) and not current + d > best + _tolerance(best):
                continue
            if d > chosen_delta:
                chosen, chosen_delta = move, d
        if chosen is None:
            result.stopped = "no admissible move"
            break
        dag = dag.apply(chosen)
        current = scorer.total(dag)
        tabu.push(chosen)
        result.moves.append(chosen)
        result.trajectory.append(current)
        if current > best + _tolerance(best):
            best_dag, best = dag, current
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                result.stopped = "patience"
                break
    else:
        result.stopped = "max_iter"
    result.dag, result.score = best_dag, best
    result.diagnostics["cached_families"] = scorer.cache_size
    result.diagnostics["tabu_length"] = len(tabu)
    return result


def seeded_dag(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> Dag:
    """Starting graph with fixed edges, e.g. every treatment pointing at the outcome."""
    return Dag(nodes, edges)
