"""Causal discovery: kernel CI tests, PC, orientation and bias classification."""

from .kci import KciResult, kci_test
from .pc import CiRecord, Skeleton, pc_skeleton
from .orient import BackgroundKnowledge, background_violations, orient
from .biases import BiasReport, classify_biases
from .snapshots import SnapshotStream, edge_diff, graph_snapshot, read_snapshots, render_timeline
from .discovery import CausalConfig, DiscoveryResult, discover_graph, sample_rows

__all__ = [
    "KciResult",
    "kci_test",
    "CiRecord",
    "Skeleton",
    "pc_skeleton",
    "BackgroundKnowledge",
    "background_violations",
    "orient",
    "BiasReport",
    "classify_biases",
    "SnapshotStream",
    "graph_snapshot",
    "read_snapshots",
    "edge_diff",
    "render_timeline",
    "CausalConfig",
    "DiscoveryResult",
    "discover_graph",
    "sample_rows",
]
