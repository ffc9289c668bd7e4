"""
Edge orientation: background knowledge, v-structures, then Meek rules.

The partially directed graph is held as ``pdag[u][v]`` with ``'-'`` for
u—v, ``'>'`` for u→v and ``'<'`` for u←v.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

import networkx as nx

from wpultr.causal.pc import Skeleton
from wpultr.core.errors import OrientationConflictError, ValidationError
from wpultr.core.graph import CausalGraph, Edge, EdgeMark
from wpultr.core.models import CLICK, REL

logger = logging.getLogger(__name__)

Pdag = dict[str, dict[str, str]]


@dataclass(frozen=True)
class BackgroundKnowledge:
    """Directed edges that must or must not appear."""
    required_edges: frozenset[tuple[str, str]] = field(default_factory=frozenset)
    forbidden_edges: frozenset[tuple[str, str]] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "required_edges", frozenset(map(tuple, self.required_edges)))
        object.__setattr__(self, "forbidden_edges", frozenset(map(tuple, self.forbidden_edges)))
        clash = self.required_edges & self.forbidden_edges
        if clash:
            raise ValidationError(f"edges both required and forbidden: {sorted(clash)}")

    def is_required(self, a: str, b: str) -> bool:
        return (a, b) in self.required_edges

    def is_forbidden(self, a: str, b: str) -> bool:
        return (a, b) in self.forbidden_edges

    @classmethod
    def for_click_logs(cls, features: Iterable[str]) -> "BackgroundKnowledge":
        """
        The three ULTR constraints: REL is a parent of CLICK, CLICK is never a
        parent of a SEPP feature, and no SEPP feature is a parent of REL.
        """
        features = [f for f in features if f not in (REL, CLICK)]
        forbidden = {(CLICK, x) for x in features} | {(x, REL) for x in features}
        forbidden.add((CLICK, REL))
        return cls(frozenset({(REL, CLICK)}), frozenset(forbidden))


def background_violations(graph: CausalGraph, bk: BackgroundKnowledge) -> list[str]:
    """Rendered edges breaking ``bk``; empty when the graph satisfies it."""
    problems = []
    for a, b in sorted(bk.required_edges):
        if a in graph.nodes and b in graph.nodes and not graph.has_directed(a, b):
            problems.append(f"missing {a}→{b}")
    for edge in graph.edges:
        pairs = [(edge.source, edge.target)]
        if not edge.directed:
            pairs.append((edge.target, edge.source))
        for a, b in pairs:
            if bk.is_forbidden(a, b):
                problems.append(f"forbidden {edge.render()}")
    return sorted(problems)


class _Orienter:
    def __init__(self, skeleton: Skeleton, bk: BackgroundKnowledge, strict: bool):
        self.skeleton = skeleton
        self.bk = bk
        self.strict = strict
        self.locked: set[tuple[str, str]] = set()
        self.pdag: Pdag = {n: {} for n in skeleton.nodes}
        for pair in skeleton.edges:
            a, b = sorted(pair)
            self.pdag[a][b] = "-"
            self.pdag[b][a] = "-"

    def adjacent(self, a: str, b: str) -> bool:
        return b in self.pdag[a]

    def undirected(self, a: str, b: str) -> bool:
        return self.pdag[a].get(b) == "-"

    def directed(self, a: str, b: str) -> bool:
        return self.pdag[a].get(b) == ">"

    def _set(self, a: str, b: str) -> None:
        self.pdag[a][b] = ">"
        self.pdag[b][a] = "<"

    def _creates_cycle(self, a: str, b: str) -> bool:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.pdag)
        graph.add_edges_from((u, v) for u in self.pdag for v, m in self.pdag[u].items() if m == ">")
        return nx.has_path(graph, b, a)

    def conflict(self, message: str, edge: tuple[str, str]) -> None:
        if self.strict:
            raise OrientationConflictError(message, edge)
        logger.warning("%s: %s→%s (kept background orientation)", message, *edge)

    def apply_background(self) -> None:
        for a, b in sorted(self.bk.required_edges):
            if a not in self.pdag or b not in self.pdag:
                continue
            if self.directed(b, a) and (b, a) in self.locked:
                raise OrientationConflictError("required edge contradicts background", (a, b))
            self._set(a, b)
            self.locked.add((a, b))
        for a in sorted(self.pdag):
            for b in sorted(self.pdag[a]):
                if not self.undirected(a, b):
                    continue
                forward, backward = self.bk.is_forbidden(a, b), self.bk.is_forbidden(b, a)
                if forward and backward:
                    raise OrientationConflictError("both directions forbidden", (a, b))
                if backward:
                    self._set(a, b)
                    self.locked.add((a, b))

    def orient_v_structures(self) -> None:
        for c in sorted(self.pdag):
            neighbours = sorted(self.pdag[c])
            for a, b in combinations(neighbours, 2):
                if self.adjacent(a, b):
                    continue
                sep = self.skeleton.sep_set(a, b)
                if sep is None or c in sep:
                    continue
                for parent in (a, b):
                    self._orient_collider_edge(parent, c)

    def _orient_collider_edge(self, a: str, c: str) -> None:
        if self.directed(a, c):
            return
        if self.directed(c, a):
            if (c, a) in self.locked:
                self.conflict("v-structure contradicts background knowledge", (a, c))
            else:
                logger.debug("conflicting v-structures at %s; keeping %s→%s", c, c, a)
            return
        if self.bk.is_forbidden(a, c):
            self.conflict("v-structure needs a forbidden edge", (a, c))
            return
        if self._creates_cycle(a, c):
            logger.warning("v-structure edge %s→%s would close a cycle; skipped", a, c)
            return
        self._set(a, c)

    # Meek rules, applied in sorted order until nothing changes

    def _try(self, a: str, b: str) -> bool:
        if self.bk.is_forbidden(a, b) or self._creates_cycle(a, b):
            return False
        self._set(a, b)
        return True

    def rule1(self) -> bool:
        """a→b—c with a, c non-adjacent: orient b→c."""
        for b in sorted(self.pdag):
            parents = [a for a, m in self.pdag[b].items() if m == "<"]
            for c in sorted(n for n, m in self.pdag[b].items() if m == "-"):
                if any(not self.adjacent(a, c) and a != c for a in parents):
                    if self._try(b, c):
                        return True
        return False

    def rule2(self) -> bool:
        """a→b→c with a—c: orient a→c."""
        for a in sorted(self.pdag):
            for c in sorted(n for n, m in self.pdag[a].items() if m == "-"):
                if any(self.directed(a, b) and self.directed(b, c) for b in self.pdag[a]):
                    if self._try(a, c):
                        return True
        return False

    def rule3(self) -> bool:
        """a—c→b, a—d→b, a—b, c and d non-adjacent: orient a→b."""
        for a in sorted(self.pdag):
            undirected = sorted(n for n, m in self.pdag[a].items() if m == "-")
            for b in undirected:
                feeders = [n for n in undirected if n != b and self.directed(n, b)]
                if any(not self.adjacent(c, d) for c, d in combinations(feeders, 2)):
                    if self._try(a, b):
                        return True
        return False

    def rule4(self) -> bool:
        """a—b with a chain a—c→d→b, c and b non-adjacent, a adjacent to d: orient a→b."""
        for a in sorted(self.pdag):
            for b in sorted(n for n, m in self.pdag[a].items() if m == "-"):
                for d in sorted(self.pdag[a]):
                    if d == b or not self.directed(d, b):
                        continue
                    for c in sorted(self.pdag[a]):
                        if c in (b, d) or self.adjacent(c, b):
                            continue
                        if self.undirected(a, c) and self.directed(c, d):
                            if self._try(a, b):
                                return True
        return False

    def apply_meek(self) -> None:
        while self.rule1() or self.rule2() or self.rule3() or self.rule4():
            pass

    def result(self) -> CausalGraph:
        edges = set()
        for a in self.pdag:
            for b, mark in self.pdag[a].items():
                if mark == ">":
                    edges.add(Edge(a, b))
                elif mark == "-" and a < b:
                    edges.add(Edge(a, b, EdgeMark.UNDIRECTED))
        return CausalGraph(self.skeleton.nodes, edges)


def orient(
    skeleton: Skeleton,
    sep_sets=None,
    bk: BackgroundKnowledge | None = None,
    strict: bool = True,
) -> CausalGraph:
    """
    Orient a skeleton into a partially directed graph.

    Background knowledge is applied first (REL→CLICK is added if missing,
    CLICK—x becomes x→CLICK, REL—x becomes REL→x), then v-structures from the
    separating sets, then Meek rules to closure. Unresolved edges stay
    undirected.

    Args:
        sep_sets: Overrides the skeleton's separating sets when given.
        bk: Defaults to the ULTR constraints over the skeleton's feature nodes.
        strict: Raise OrientationConflictError when a v-structure contradicts
            background knowledge; otherwise keep the background orientation
            and log a warning.
    """
    if sep_sets is not None:
        skeleton = Skeleton(
            skeleton.nodes,
            skeleton.edges,
            {frozenset(k): frozenset(v) for k, v in dict(sep_sets).items()},
            skeleton.tests,
        )
    if bk is None:
        bk = BackgroundKnowledge.for_click_logs(skeleton.nodes)
    if REL in skeleton.nodes and CLICK in skeleton.nodes and not skeleton.has_edge(REL, CLICK):
        skeleton = Skeleton(
            skeleton.nodes,
            skeleton.edges | {frozenset((REL, CLICK))},
            skeleton.sep_sets,
            skeleton.tests,
        )

    orienter = _Orienter(skeleton, bk, strict)
    orienter.apply_background()
    orienter.orient_v_structures()
    orienter.apply_meek()
    graph = orienter.result()
    logger.debug("Oriented graph: %s", sorted(graph.edge_strings()))
    return graph
