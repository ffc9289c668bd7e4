"""Ranking metrics, frequency-bucket reports and re-rank position analysis."""

from .metrics import RankedQuery, dcg_at_k, err_at_k, kendall_tau, ndcg_at_k, rank_query
from .report import (
    EvalConfig,
    MetricReport,
    MetricRow,
    bucket_report,
    evaluate_rankings,
    metric_report,
    rank_log,
)
from .rerank import logged_orders, rerank_position_analysis, score_orders, write_position_analysis

__all__ = [
    "RankedQuery",
    "dcg_at_k",
    "err_at_k",
    "ndcg_at_k",
    "kendall_tau",
    "rank_query",
    "EvalConfig",
    "MetricReport",
    "MetricRow",
    "bucket_report",
    "evaluate_rankings",
    "metric_report",
    "rank_log",
    "logged_orders",
    "rerank_position_analysis",
    "score_orders",
    "write_position_analysis",
]
