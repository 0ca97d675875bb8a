"""DOT and JSON renderings of learned graphs."""

from __future__ import annotations

import re

from .graph import Dag, Pdag

_BARE_ID = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_KEYWORDS = {"node", "edge", "graph", "digraph", "subgraph", "strict"}


def dot_id(name: str) -> str:
    if _BARE_ID.match(name) and name.lower() not in _KEYWORDS:
        return name
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _parts(graph: Dag | Pdag) -> tuple[list[tuple[str, str]], list[tuple[str, str]]]:
    if isinstance(graph, Pdag):
        return sorted(graph.directed_edges()), sorted(graph.undirected_edges())
    return sorted(graph.edges()), []


def export_dot(graph: Dag | Pdag, name: str = "G") -> str:
    """DOT digraph with nodes and edges in lexicographic order; undirected edges use ``dir=none``."""
    directed, undirected = _parts(graph)
    lines = [f"digraph {dot_id(name)} {{"]
    lines += [f"  {dot_id(v)};" for v in sorted(graph.nodes)]
    lines += [f"  {dot_id(a)} -> {dot_id(b)};" for a, b in directed]
    lines += [f"  {dot_id(a)} -> {dot_id(b)} [dir=none];" for a, b in undirected]
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_record(
    graph: Dag | Pdag,
    algorithm: str,
    score: float | None = None,
    alpha: float | None = None,
    **extra,
) -> dict:
    directed, undirected = _parts(graph)
    record = {
        "nodes": sorted(graph.nodes),
        "directed": [list(e) for e in directed],
        "undirected": [list(e) for e in undirected],
        "algorithm": algorithm,
        "score": score,
        "alpha": alpha,
    }
    record.update(extra)
    return record


def graph_from_record(record: dict) -> Dag | Pdag:
    if record.get("undirected"):
        return Pdag(record["nodes"], map(tuple, record["directed"]), map(tuple, record["undirected"]))
    return Dag(record["nodes"], map(tuple, record["directed"]))
