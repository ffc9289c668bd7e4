"""Synthetic click logs with a known generating graph."""

from .scm import (
    ClickCoefficients,
    GroundTruth,
    ScmConfig,
    generate,
    ground_truth_graph,
    pos_score,
    relevance_only_click_rate,
)
from .buckets import HIGH_BUCKETS, TAIL_BUCKETS, assign_frequency_buckets

__all__ = [
    "ClickCoefficients",
    "GroundTruth",
    "ScmConfig",
    "generate",
    "ground_truth_graph",
    "pos_score",
    "relevance_only_click_rate",
    "HIGH_BUCKETS",
    "TAIL_BUCKETS",
    "assign_frequency_buckets",
]
