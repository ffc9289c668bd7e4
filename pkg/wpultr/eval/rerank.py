"""Where do the documents at each original position land after re-ranking?"""

from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from wpultr.core.errors import ValidationError
from wpultr.core.models import ClickLog
from wpultr.eval.metrics import rank_query

POSITION_COLUMNS = ["orig_pos", "mean_new_pos", "sd"]


def rerank_position_analysis(
    original: Mapping[str, Sequence[str]],
    new: Mapping[str, Sequence[str]],
    max_pos: int = 10,
) -> pd.DataFrame:
    """
    Mean and standard deviation of the new position of the document found at
    each original position 1..max_pos, over all queries.

    Args:
        original, new: query_id -> doc_ids in ranked order.

    Raises:
        ValidationError: A query's two rankings cover different documents.
    """
    if set(original) != set(new):
        raise ValidationError("original and new rankings cover different queries")
    landed: dict[int, list[int]] = {k: [] for k in range(1, max_pos + 1)}
    for query_id in sorted(original):
        before, after = list(original[query_id]), list(new[query_id])
        if sorted(before) != sorted(after) or len(set(before)) != len(before):
            raise ValidationError(f"query {query_id}: rankings are over different documents")
        new_pos = {doc: i for i, doc in enumerate(after, start=1)}
        for k, doc in enumerate(before[:max_pos], start=1):
            landed[k].append(new_pos[doc])

    rows = []
    for k, positions in landed.items():
        if not positions:
            continue
        arr = np.asarray(positions, dtype=np.float64)
        rows.append({"orig_pos": k, "mean_new_pos": float(arr.mean()), "sd": float(arr.std())})
    return pd.DataFrame(rows, columns=POSITION_COLUMNS)


def logged_orders(log: ClickLog) -> dict[str, list[str]]:
    """Displayed order of each query's first session."""
    orders: dict[str, list[str]] = {}
    for ranked in log.ranked_lists():
        orders.setdefault(ranked[0].query_id, [r.doc_id for r in ranked])
    return orders


def score_orders(log: ClickLog, scores: Sequence[float]) -> dict[str, list[str]]:
    """Order of each query's first-session documents by descending score."""
    scores = np.asarray(scores, dtype=np.float64)
    index = {id(r): i for i, r in enumerate(log.records)}
    orders: dict[str, list[str]] = {}
    for ranked in log.ranked_lists():
        query_id = ranked[0].query_id
        if query_id in orders:
            continue
        ranked_query = rank_query(
            query_id,
            [r.doc_id for r in ranked],
            [scores[index[id(r)]] for r in ranked],
            [0] * len(ranked),
        )
        orders[query_id] = list(ranked_query.doc_ids)
    return orders


def write_position_analysis(frame: pd.DataFrame, path: str | Path, method: str | None = None) -> None:
    out = frame if method is None else frame.assign(method=method)
    out.to_csv(path, index=False, float_format="%.9g", lineterminator="\n")
