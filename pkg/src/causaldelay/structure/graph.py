"""Directed and partially directed graphs over named nodes."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from ..errors import GraphError

MOVE_KINDS = ("add", "remove", "reverse")


@dataclass(frozen=True, order=True)
class Move:
    kind: str
    edge: tuple[str, str]

    def __post_init__(self):
        if self.kind not in MOVE_KINDS:
            raise GraphError(f"unknown move kind {self.kind!r}")

    def inverse(self) -> "Move":
        a, b = self.edge
        if self.kind == "add":
            return Move("remove", (a, b))
        if self.kind == "remove":
            return Move("add", (a, b))
        return Move("reverse", (b, a))

    def changed_nodes(self) -> tuple[str, ...]:
        """Nodes whose parent sets the move touches."""
        a, b = self.edge
        return (b,) if self.kind != "reverse" else (a, b)

    def __str__(self) -> str:
        return f"{self.kind} {self.edge[0]}->{self.edge[1]}"


class Dag:
    """Acyclic directed graph. Every mutation rejects self-loops and cycles."""

    def __init__(self, nodes: Iterable[str], edges: Iterable[tuple[str, str]] = ()):
        self.nodes: tuple[str, ...] = tuple(nodes)
        if len(set(self.nodes)) != len(self.nodes):
            raise GraphError("duplicate node names")
        self._parents: dict[str, set[str]] = {v: set() for v in self.nodes}
        self._children: dict[str, set[str]] = {v: set() for v in self.nodes}
        for a, b in edges:
            self.add_edge(a, b)

    # queries

    def _check(self, *names: str) -> None:
        for v in names:
            if v not in self._parents:
                raise GraphError(f"unknown node {v!r}")

    def parents(self, v: str) -> frozenset[str]:
        self._check(v)
        return frozenset(self._parents[v])

    def children(self, v: str) -> frozenset[str]:
        self._check(v)
        return frozenset(self._children[v])

    def has_edge(self, a: str, b: str) -> bool:
        return b in self._children.get(a, ())

    def edges(self) -> list[tuple[str, str]]:
        order = {v: i for i, v in enumerate(self.nodes)}
        out = [(a, b) for a in self.nodes for b in self._children[a]]
        return sorted(out, key=lambda e: (order[e[0]], order[e[1]]))

    def n_edges(self) -> int:
        return sum(len(c) for c in self._children.values())

    def reaches(self, src: str, dst: str) -> bool:
        """True when a directed path (possibly empty) runs from ``src`` to ``dst``."""
        if src == dst:
            return True
        seen = {src}
        queue = deque([src])
        while queue:
            v = queue.popleft()
            for c in self._children[v]:
                if c == dst:
                    return True
                if c not in seen:
                    seen.add(c)
                    queue.append(c)
        return False

    def descendants(self, v: str) -> set[str]:
        self._check(v)
        seen: set[str] = set()
        queue = deque([v])
        while queue:
            for c in self._children[queue.popleft()]:
                if c not in seen:
                    seen.add(c)
                    queue.append(c)
        return seen

    def topological_order(self) -> list[str]:
        indeg = {v: len(self._parents[v]) for v in self.nodes}
        ready = [v for v in self.nodes if indeg[v] == 0]
        out = []
        while ready:
            v = ready.pop(0)
            out.append(v)
            for c in sorted(self._children[v], key=self.nodes.index):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        return out

    def is_acyclic(self) -> bool:
        return len(self.topological_order()) == len(self.nodes)

    def skeleton(self) -> frozenset[frozenset[str]]:
        return frozenset(frozenset(e) for e in self.edges())

    def v_structures(self) -> frozenset[tuple[str, str, str]]:
        """Colliders ``a -> c <- b`` with ``a``, ``b`` non-adjacent, as (min, c, max)."""
        out = set()
        for c in self.nodes:
            ps = sorted(self._parents[c])
            for i, a in enumerate(ps):
                for b in ps[i + 1:]:
                    if not self.has_edge(a, b) and not self.has_edge(b, a):
                        out.add((a, c, b))
        return frozenset(out)

    # mutation

    def add_edge(self, a: str, b: str) -> None:
        self._check(a, b)
        if a == b:
            raise GraphError(f"self-loop on {a!r}")
        if self.has_edge(a, b):
            raise GraphError(f"edge {a}->{b} already present")
        if self.reaches(b, a):
            raise GraphError(f"edge {a}->{b} would create a cycle")
        self._parents[b].add(a)
        self._children[a].add(b)

    def remove_edge(self, a: str, b: str) -> None:
        if not self.has_edge(a, b):
            raise GraphError(f"edge {a}->{b} not present")
        self._parents[b].discard(a)
        self._children[a].discard(b)

    def reverse_edge(self, a: str, b: str) -> None:
        self.remove_edge(a, b)
        try:
            self.add_edge(b, a)
        except GraphError:
            self.add_edge(a, b)
            raise

    def apply(self, move: Move) -> "Dag":
        """New graph with ``move`` applied; the receiver is left untouched."""
        out = self.copy()
        a, b = move.edge
        if move.kind == "add":
            out.add_edge(a, b)
        elif move.kind == "remove":
            out.remove_edge(a, b)
        else:
            out.reverse_edge(a, b)
        return out

    def copy(self) -> "Dag":
        out = Dag(self.nodes)
        for v in self.nodes:
            out._parents[v] = set(self._parents[v])
            out._children[v] = set(self._children[v])
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, Dag) and set(self.nodes) == set(other.nodes) and set(self.edges()) == set(other.edges())

    def __hash__(self):
        return hash((frozenset(self.nodes), frozenset(self.edges())))

    def __repr__(self) -> str:
        return f"Dag(nodes={list(self.nodes)}, edges={self.edges()})"


def markov_equivalent(a: Dag, b: Dag) -> bool:
    return a.skeleton() == b.skeleton() and a.v_structures() == b.v_structures()


class Pdag:
    """Graph mixing directed and undirected edges; the directed part stays acyclic."""

    def __init__(
        self,
        nodes: Iterable[str],
        directed: Iterable[tuple[str, str]] = (),
        undirected: Iterable[Iterable[str]] = (),
    ):
        self.nodes: tuple[str, ...] = tuple(nodes)
        self._dag = Dag(self.nodes)
        self._undirected: set[frozenset[str]] = set()
        self.conflicts: list[tuple[str, str]] = []
        for a, b in directed:
            self.add_directed(a, b)
        for e in undirected:
            a, b = tuple(e)
            self.add_undirected(a, b)

    def add_undirected(self, a: str, b: str) -> None:
        self._dag._check(a, b)
        if a == b:
            raise GraphError(f"self-loop on {a!r}")
        if self.adjacent(a, b):
            raise GraphError(f"{a} and {b} already adjacent")
        self._undirected.add(frozenset((a, b)))

    def add_directed(self, a: str, b: str) -> None:
        if frozenset((a, b)) in self._undirected:
            raise GraphError(f"{a}-{b} is undirected")
        self._dag.add_edge(a, b)

    def orient(self, a: str, b: str) -> None:
        """Turn the undirected edge ``a - b`` into ``a -> b``."""
        key = frozenset((a, b))
        if key not in self._undirected:
            raise GraphError(f"no undirected edge {a}-{b}")
        self._undirected.discard(key)
        try:
            self._dag.add_edge(a, b)
        except GraphError:
            self._undirected.add(key)
            raise

    def can_orient(self, a: str, b: str) -> bool:
        return not self._dag.reaches(b, a)

    def is_directed(self, a: str, b: str) -> bool:
        return self._dag.has_edge(a, b)

    def is_undirected(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self._undirected

    def adjacent(self, a: str, b: str) -> bool:
        return self.is_undirected(a, b) or self._dag.has_edge(a, b) or self._dag.has_edge(b, a)

    def directed_edges(self) -> list[tuple[str, str]]:
        return self._dag.edges()

    def undirected_edges(self) -> list[tuple[str, str]]:
        return sorted(tuple(sorted(e)) for e in self._undirected)

    def undirected_neighbors(self, v: str) -> set[str]:
        return {next(iter(e - {v})) for e in self._undirected if v in e}

    def parents(self, v: str) -> frozenset[str]:
        return self._dag.parents(v)

    def children(self, v: str) -> frozenset[str]:
        return self._dag.children(v)

    def reaches(self, a: str, b: str) -> bool:
        return self._dag.reaches(a, b)

    def skeleton(self) -> frozenset[frozenset[str]]:
        return frozenset(self._undirected) | self._dag.skeleton()

    def copy(self) -> "Pdag":
        out = Pdag(self.nodes, self.directed_edges(), self._undirected)
        out.conflicts = list(self.conflicts)
        return out

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Pdag)
            and set(self.nodes) == set(other.nodes)
            and set(self.directed_edges()) == set(other.directed_edges())
            and self._undirected == other._undirected
        )

    def __hash__(self):
        return hash((frozenset(self.nodes), frozenset(self.directed_edges()), frozenset(self._undirected)))

    def __repr__(self) -> str:
        return f"Pdag(directed={self.directed_edges()}, undirected={self.undirected_edges()})"


@dataclass
class SepSets:
    """Separating sets found by the skeleton search, keyed by unordered pair."""

    _sets: dict[frozenset[str], frozenset[str]] = field(default_factory=dict)

    def record(self, a: str, b: str, cond: Iterable[str]) -> None:
        cond = frozenset(cond)
        if a in cond or b in cond:
            raise GraphError(f"separating set for {a},{b} contains an endpoint")
        self._sets[frozenset((a, b))] = cond

    def get(self, a: str, b: str) -> frozenset[str] | None:
        return self._sets.get(frozenset((a, b)))

    def __contains__(self, pair) -> bool:
        return frozenset(pair) in self._sets

    def __getitem__(self, pair) -> frozenset[str]:
        return self._sets[frozenset(pair)]

    def __len__(self) -> int:
        return len(self._sets)

    def items(self):
        return self._sets.items()


class TabuList:
    """Bounded FIFO of recent moves."""

    def __init__(self, capacity: int = 50):
        if capacity < 1:
            raise GraphError("tabu capacity must be positive")
        self.capacity = capacity
        self._moves: deque[Move] = deque(maxlen=capacity)

    def push(self, move: Move) -> None:
        self._moves.append(move)

    def __contains__(self, move: Move) -> bool:
        return move in self._moves

    def __len__(self) -> int:
        return len(self._moves)

    def __iter__(self):
        return iter(self._moves)

    def forbids(self, move: Move) -> bool:
        """A move is tabu when it would undo a recorded move."""
        return move.inverse() in self._moves
