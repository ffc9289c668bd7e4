"""
PC skeleton search with KCI tests.

Order-independent ("stable") variant: adjacency sets are frozen at the start
of each conditioning-set size, so the edges tested at one level can run in
parallel and are applied in sorted order. Nodes and conditioning sets are
enumerated lexicographically.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from wpultr.causal.kci import DEFAULT_CAP, kci_test
from wpultr.core.errors import ValidationError
from wpultr.core.graph import CausalGraph, Edge, EdgeMark
from wpultr.preprocess.transform import DesignMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CiRecord:
    """One conditional-independence test run during the search."""
    x: str
    y: str
    conditioning: tuple[str, ...]
    p_value: float


@dataclass(frozen=True)
class Skeleton:
    """Undirected adjacency structure plus the separating set of every removed pair."""
    nodes: tuple[str, ...]
    edges: frozenset[frozenset[str]]
    sep_sets: Mapping[frozenset[str], frozenset[str]] = field(default_factory=dict)
    tests: tuple[CiRecord, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sep_sets", MappingProxyType(dict(self.sep_sets)))

    def has_edge(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.edges

    def adjacent(self, node: str) -> tuple[str, ...]:
        return tuple(n for n in self.nodes if n != node and self.has_edge(node, n))

    def sep_set(self, a: str, b: str) -> frozenset[str] | None:
        return self.sep_sets.get(frozenset((a, b)))

    def to_graph(self) -> CausalGraph:
        return CausalGraph(
            self.nodes,
            {Edge(*sorted(pair), EdgeMark.UNDIRECTED) for pair in self.edges},
        )

    @classmethod
    def from_edges(
        cls,
        nodes: Sequence[str],
        edges: Sequence[tuple[str, str]],
        sep_sets: Mapping[tuple[str, str], Sequence[str]] | None = None,
    ) -> "Skeleton":
        """Build a skeleton by hand, e.g. for orientation tests."""
        seps = {frozenset(k): frozenset(v) for k, v in (sep_sets or {}).items()}
        return cls(tuple(nodes), frozenset(frozenset(e) for e in edges), seps)


def _column_blocks(Z, columns) -> tuple[np.ndarray, dict[str, list[int]]]:
    if isinstance(Z, DesignMatrix):
        values = Z.values
        names = list(columns) if columns is not None else list(Z.layout.node_names)
        return values, {name: Z.layout.indices([name]) for name in names}
    values = np.asarray(Z, dtype=np.float64)
    if isinstance(columns, Mapping):
        return values, {k: list(v) for k, v in columns.items()}
    if columns is None:
        columns = [f"x{i}" for i in range(values.shape[1])]
    return values, {name: [i] for i, name in enumerate(columns)}


def pc_skeleton(
    Z,
    columns=None,
    alpha: float = 0.05,
    cap: int = DEFAULT_CAP,
    seed: int = 0,
    jobs: int = 1,
    max_cond_size: int | None = None,
) -> Skeleton:
    """
    Learn the undirected skeleton and separating sets.

    Args:
        Z: A DesignMatrix or a plain (n, d) array.
        columns: Node names to use. For a DesignMatrix, a subset of its layout
            nodes (multi-column nodes are tested as blocks). For an array, one
            name per column, or a mapping name -> column indices.
        alpha: Significance level; an edge is removed when some conditioning
            set gives p_value > alpha.
        jobs: Worker threads for the tests of one level; results do not
            depend on it.
    """
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    values, blocks = _column_blocks(Z, columns)
    nodes = tuple(sorted(blocks))
    adjacency = {n: set(nodes) - {n} for n in nodes}
    sep_sets: dict[frozenset[str], frozenset[str]] = {}
    tests: list[CiRecord] = []

    def block(names) -> np.ndarray:
        idx = [i for name in names for i in blocks[name]]
        return values[:, idx]

    def search(pair, frozen_adj, level) -> tuple[frozenset[str] | None, list[CiRecord]]:
        a, b = pair
        run: list[CiRecord] = []
        candidates: list[tuple[str, ...]] = []
        for first, second in ((a, b), (b, a)):
            pool = sorted(frozen_adj[first] - {second})
            for subset in combinations(pool, level):
                if subset not in candidates:
                    candidates.append(subset)
        for subset in candidates:
            result = kci_test(block([a]), block([b]), block(subset) if subset else None,
                              cap=cap, seed=seed)
            run.append(CiRecord(a, b, subset, result.p_value))
            if result.p_value > alpha:
                return frozenset(subset), run
        return None, run

    level = 0
    while True:
        frozen = {n: set(adj) for n, adj in adjacency.items()}
        pairs = [
            (a, b) for a, b in combinations(nodes, 2)
            if b in frozen[a]
            and (len(frozen[a] - {b}) >= level or len(frozen[b] - {a}) >= level)
        ]
        if not pairs or (max_cond_size is not None and level > max_cond_size):
            break
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(lambda p: search(p, frozen, level), pairs))
        else:
            outcomes = [search(p, frozen, level) for p in pairs]

        removed = 0
        for (a, b), (sep, run) in zip(pairs, outcomes):
            tests.extend(run)
            if sep is not None:
                adjacency[a].discard(b)
                adjacency[b].discard(a)
                sep_sets[frozenset((a, b))] = sep
                removed += 1
        logger.info("PC level %d: tested %d edges, removed %d", level, len(pairs), removed)
        level += 1

    edges = frozenset(frozenset((a, b)) for a in nodes for b in adjacency[a] if a < b)
    return Skeleton(nodes, edges, sep_sets, tuple(tests))
