"""
Immutable causal graph over REL, CLICK and SEPP feature nodes.

Edges are directed or undirected. The directed part is checked for cycles on
every construction, so every "mutation" (which returns a new graph) is checked.
"""

import json
from dataclasses import dataclass, field
from enum import Enum as PyEnum
from itertools import combinations
from typing import Iterable

import networkx as nx

from wpultr.core.errors import CyclicGraphError, GraphError
from wpultr.core.models import CLICK, REL


class EdgeMark(PyEnum):
    """Edge mark in a partially directed graph."""
    DIRECTED = "directed"
    UNDIRECTED = "undirected"


@dataclass(frozen=True)
class Edge:
    """An edge; undirected edges store their endpoints in sorted order."""
    source: str
    target: str
    mark: EdgeMark = EdgeMark.DIRECTED

    def __post_init__(self):
        if isinstance(self.mark, str):
            object.__setattr__(self, "mark", EdgeMark(self.mark))
        if self.mark is EdgeMark.UNDIRECTED and self.source > self.target:
            source, target = self.target, self.source
            object.__setattr__(self, "source", source)
            object.__setattr__(self, "target", target)

    @property
    def directed(self) -> bool:
        return self.mark is EdgeMark.DIRECTED

    def render(self) -> str:
        arrow = "→" if self.directed else "—"
        return f"{self.source}{arrow}{self.target}"

    def to_dict(self) -> dict:
        return {"from": self.source, "to": self.target, "mark": self.mark.value}

    def __lt__(self, other: "Edge") -> bool:
        return (self.source, self.target, self.mark.value) < (
            other.source, other.target, other.mark.value
        )


@dataclass(frozen=True)
class CausalGraph:
    """A directed mixed graph with at most one edge per node pair."""
    nodes: tuple[str, ...]
    edges: frozenset[Edge] = field(default_factory=frozenset)

    def __post_init__(self):
        nodes = tuple(self.nodes)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", frozenset(self.edges))
        if len(set(nodes)) != len(nodes):
            raise GraphError(f"duplicate nodes: {nodes}")
        known = set(nodes)
        pairs: set[frozenset[str]] = set()
        for edge in self.edges:
            if edge.source == edge.target:
                raise GraphError(f"self-loop on {edge.source}")
            if edge.source not in known or edge.target not in known:
                raise GraphError(f"edge {edge.render()} references an unknown node")
            pair = frozenset((edge.source, edge.target))
            if pair in pairs:
                raise GraphError(f"more than one edge between {sorted(pair)}")
            pairs.add(pair)
        if not self.is_acyclic():
            cycle = nx.find_cycle(self.to_networkx())
            raise CyclicGraphError(
                "directed cycle: " + " → ".join(str(u) for u, _ in cycle) + f" → {cycle[0][0]}"
            )

    # ------------------------------------------------------------------
    # Queries
    # ------------------------------------------------------------------

    def to_networkx(self) -> nx.DiGraph:
        """Directed part as a networkx DiGraph (undirected edges omitted)."""
        graph = nx.DiGraph()
        graph.add_nodes_from(self.nodes)
        graph.add_edges_from((e.source, e.target) for e in self.edges if e.directed)
        return graph

    def is_acyclic(self) -> bool:
        return nx.is_directed_acyclic_graph(self.to_networkx())

    @property
    def directed_edges(self) -> list[Edge]:
        return sorted(e for e in self.edges if e.directed)

    @property
    def undirected_edges(self) -> list[Edge]:
        return sorted(e for e in self.edges if not e.directed)

    def edge_between(self, a: str, b: str) -> Edge | None:
        for edge in self.edges:
            if {edge.source, edge.target} == {a, b}:
                return edge
        return None

    def is_adjacent(self, a: str, b: str) -> bool:
        return self.edge_between(a, b) is not None

    def has_directed(self, a: str, b: str) -> bool:
        return Edge(a, b) in self.edges

    def has_undirected(self, a: str, b: str) -> bool:
        return Edge(a, b, EdgeMark.UNDIRECTED) in self.edges

    def parents(self, node: str) -> tuple[str, ...]:
        """Directed parents in node order."""
        found = {e.source for e in self.edges if e.directed and e.target == node}
        return tuple(n for n in self.nodes if n in found)

    def children(self, node: str) -> tuple[str, ...]:
        found = {e.target for e in self.edges if e.directed and e.source == node}
        return tuple(n for n in self.nodes if n in found)

    def neighbors(self, node: str) -> tuple[str, ...]:
        found = {e.target if e.source == node else e.source
                 for e in self.edges if node in (e.source, e.target)}
        return tuple(n for n in self.nodes if n in found)

    def has_directed_path(self, a: str, b: str) -> bool:
        return nx.has_path(self.to_networkx(), a, b)

    @property
    def feature_nodes(self) -> tuple[str, ...]:
        return tuple(n for n in self.nodes if n not in (REL, CLICK))

    def edge_strings(self) -> set[str]:
        return {e.render() for e in self.edges}

    # ------------------------------------------------------------------
    # Constructors returning new graphs
    # ------------------------------------------------------------------

    def with_edge(self, a: str, b: str, mark: EdgeMark = EdgeMark.DIRECTED) -> "CausalGraph":
        """Graph with the a–b edge replaced by one with ``mark``."""
        kept = {e for e in self.edges if {e.source, e.target} != {a, b}}
        return CausalGraph(self.nodes, kept | {Edge(a, b, mark)})

    def without_edge(self, a: str, b: str) -> "CausalGraph":
        return CausalGraph(
            self.nodes, {e for e in self.edges if {e.source, e.target} != {a, b}}
        )

    def induced(self, nodes: Iterable[str]) -> "CausalGraph":
        keep = set(nodes)
        return CausalGraph(
            tuple(n for n in self.nodes if n in keep),
            {e for e in self.edges if e.source in keep and e.target in keep},
        )

    # ------------------------------------------------------------------
    # Comparison
    # ------------------------------------------------------------------

    def structural_hamming_distance(self, other: "CausalGraph") -> int:
        """
        Count node pairs whose edge state differs between two graphs.

        A pair is in one of four states: absent, a→b, b→a or a—b. Each pair
        whose state differs contributes 1 (insertion, deletion or reorientation).
        """
        nodes = sorted(set(self.nodes) | set(other.nodes))
        distance = 0
        for a, b in combinations(nodes, 2):
            if _pair_state(self, a, b) != _pair_state(other, a, b):
                distance += 1
        return distance

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [e.to_dict() for e in sorted(self.edges)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CausalGraph":
        try:
            edges = {Edge(e["from"], e["to"], EdgeMark(e["mark"])) for e in data.get("edges", [])}
            return cls(tuple(data["nodes"]), edges)
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, GraphError):
                raise
            raise GraphError(f"malformed graph JSON: {e}") from e

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "CausalGraph":
        return cls.from_dict(json.loads(text))


def _pair_state(graph: CausalGraph, a: str, b: str) -> str:
    edge = graph.edge_between(a, b) if a in graph.nodes and b in graph.nodes else None
    if edge is None:
        return "none"
    if not edge.directed:
        return "undirected"
    return "forward" if edge.source == a else "backward"
