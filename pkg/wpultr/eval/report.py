"""Metric tables: overall and High/Tail frequency partitions."""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from wpultr.core.errors import ValidationError
from wpultr.core.models import ClickLog
from wpultr.eval.metrics import RankedQuery, kendall_tau, rank_query
from wpultr.simulate.buckets import HIGH_BUCKETS, TAIL_BUCKETS

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["method", "metric", "cutoff", "partition", "mean", "sd", "n_queries"]
RANK_METRICS = ("dcg", "err", "ndcg")


@dataclass(frozen=True)
class EvalConfig:
    """The ``eval`` config section."""
    cutoffs: tuple[int, ...] = (1, 3, 5, 10)
    n_buckets: int = 10
    holdout_fraction: float = 0.2
    max_position: int = 10

    def __post_init__(self):
        object.__setattr__(self, "cutoffs", tuple(int(k) for k in self.cutoffs))
        if not self.cutoffs or min(self.cutoffs) < 1:
            raise ValidationError("eval.cutoffs must be positive integers")
        if not 0 <= self.holdout_fraction < 1:
            raise ValidationError("eval.holdout_fraction must be in [0, 1)")


@dataclass(frozen=True)
class MetricRow:
    method: str
    metric: str
    cutoff: int
    partition: str
    mean: float
    sd: float
    n_queries: int


@dataclass
class MetricReport:
    rows: list[MetricRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def get(self, method: str, metric: str, cutoff: int = 0, partition: str = "all") -> MetricRow | None:
        for row in self.rows:
            if (row.method, row.metric, row.cutoff, row.partition) == (method, metric, cutoff, partition):
                return row
        return None

    @property
    def partitions(self) -> set[str]:
        return {row.partition for row in self.rows}

    def extend(self, other: "MetricReport") -> "MetricReport":
        self.rows.extend(other.rows)
        return self

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.rows], columns=CSV_COLUMNS)

    def to_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.9g", lineterminator="\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> "MetricReport":
        frame = pd.read_csv(path, dtype={"method": str, "metric": str, "partition": str})
        missing = [c for c in CSV_COLUMNS if c not in frame.columns]
        if missing:
            raise ValidationError(f"{path}: missing column(s) {missing}")
        return cls([
            MetricRow(r.method, r.metric, int(r.cutoff), r.partition, float(r.mean),
                      float(r.sd), int(r.n_queries))
            for r in frame.itertuples(index=False)
        ])


def _summary(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


def rank_log(log: ClickLog, scores: Sequence[float]) -> list[RankedQuery]:
    """
    Rank every query's documents by ``scores`` (one per record).

    A document shown in several sessions counts once, with its first score.

    Raises:
        ValidationError: The log lacks grades or the score count is wrong.
    """
    if len(log) and not log.has_grades:
        raise ValidationError("evaluation log lacks the true_relevance column")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (len(log),):
        raise ValidationError(f"expected {len(log)} scores, got {scores.shape}")
    queries = []
    offset = 0
    for query_id, records in log.groups():
        seen: dict[str, int] = {}
        for i, record in enumerate(records):
            seen.setdefault(record.doc_id, offset + i)
        idx = list(seen.values())
        queries.append(rank_query(
            query_id,
            list(seen),
            scores[idx],
            [log.records[j].true_relevance for j in idx],
            records[0].query_frequency_bucket,
        ))
        offset += len(records)
    return queries


def metric_report(
    queries: Sequence[RankedQuery],
    method: str,
    cutoffs: Iterable[int] = EvalConfig.cutoffs,
    partition: str = "all",
) -> MetricReport:
    report = MetricReport()
    if not queries:
        return report
    for metric in RANK_METRICS:
        for k in cutoffs:
            mean, sd = _summary([q.metric(metric, k) for q in queries])
            report.rows.append(MetricRow(method, metric, k, partition, mean, sd, len(queries)))
    taus = [kendall_tau(q.scores, q.grades) for q in queries if len(q.grades) >= 2]
    if taus:
        mean, sd = _summary(taus)
        report.rows.append(MetricRow(method, "tau", 0, partition, mean, sd, len(taus)))
    return report


def bucket_report(
    queries: Sequence[RankedQuery],
    method: str,
    cutoffs: Iterable[int] = EvalConfig.cutoffs,
) -> MetricReport:
    """Metrics for the High (buckets 0-4) and Tail (5-9) partitions; empty ones are absent."""
    if any(q.bucket is None for q in queries):
        raise ValidationError("bucket report needs freq_bucket on every query")
    report = MetricReport()
    for name, buckets in (("high", HIGH_BUCKETS), ("tail", TAIL_BUCKETS)):
        members = [q for q in queries if q.bucket in buckets]
        if members:
            report.extend(metric_report(members, method, cutoffs, name))
        else:
            logger.info("Partition %s has no queries; omitted", name)
    return report


def evaluate_rankings(
    log: ClickLog,
    scores: Sequence[float],
    method: str,
    config: EvalConfig | None = None,
) -> MetricReport:
    """Overall metrics plus the High/Tail partitions when buckets are present."""
    config = config or EvalConfig()
    queries = rank_log(log, scores)
    report = metric_report(queries, method, config.cutoffs)
    if queries and all(q.bucket is not None for q in queries):
        report.extend(bucket_report(queries, method, config.cutoffs))
    return report
