"""
Ranking metrics over graded documents (grades 0..4).

DCG uses exponential gain 2^g − 1 and a log2(i + 1) discount; ERR uses
R_g = (2^g − 1) / 2^4.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from wpultr.core.errors import ValidationError
from wpultr.core.models import MAX_GRADE


def _grades(grades: Sequence[int], k: int) -> np.ndarray:
    if k < 1:
        raise ValidationError(f"cutoff k must be >= 1, got {k}")
    return np.asarray(grades, dtype=np.float64)[:k]


def dcg_at_k(grades: Sequence[int], k: int) -> float:
    g = _grades(grades, k)
    discounts = np.log2(np.arange(2, g.size + 2))
    return float(np.sum((2.0 ** g - 1.0) / discounts))


def err_at_k(grades: Sequence[int], k: int) -> float:
    g = _grades(grades, k)
    satisfied = (2.0 ** g - 1.0) / 2.0 ** MAX_GRADE
    total = 0.0
    remaining = 1.0
    for i, r in enumerate(satisfied, start=1):
        total += remaining * r / i
        remaining *= 1.0 - r
    return float(total)


def ndcg_at_k(grades: Sequence[int], k: int) -> float:
    """DCG over the ideal DCG; 1 when no document has positive grade."""
    ideal = dcg_at_k(sorted(grades, reverse=True), k)
    if ideal == 0:
        return 1.0
    return dcg_at_k(grades, k) / ideal


def kendall_tau(scores: Sequence[float], grades: Sequence[float]) -> float:
    """Tau-b between scores and grades; 0 when either side is constant."""
    if len(scores) != len(grades):
        raise ValidationError("scores and grades differ in length")
    if len(scores) < 2:
        raise ValidationError("kendall_tau needs at least 2 items")
    tau = stats.kendalltau(scores, grades, variant="b").statistic
    return 0.0 if np.isnan(tau) else float(tau)


METRICS = {"dcg": dcg_at_k, "err": err_at_k, "ndcg": ndcg_at_k}


@dataclass(frozen=True)
class RankedQuery:
    """Documents of one ranked list ordered by descending score, ties by doc_id."""
    query_id: str
    doc_ids: tuple[str, ...]
    scores: tuple[float, ...]
    grades: tuple[int, ...]
    bucket: int | None = None

    def metric(self, name: str, k: int) -> float:
        return METRICS[name](self.grades, k)


def rank_query(
    query_id: str,
    doc_ids: Sequence[str],
    scores: Sequence[float],
    grades: Sequence[int],
    bucket: int | None = None,
) -> RankedQuery:
    if not len(doc_ids) == len(scores) == len(grades):
        raise ValidationError(f"query {query_id}: doc_ids, scores and grades differ in length")
    order = sorted(range(len(doc_ids)), key=lambda i: (-float(scores[i]), doc_ids[i]))
    return RankedQuery(
        query_id,
        tuple(doc_ids[i] for i in order),
        tuple(float(scores[i]) for i in order),
        tuple(int(grades[i]) for i in order),
        bucket,
    )
