"""Query frequency buckets."""

from collections import Counter
from dataclasses import replace

from wpultr.core.errors import ValidationError
from wpultr.core.models import MAX_BUCKET, ClickLog

HIGH_BUCKETS = frozenset(range(0, 5))
TAIL_BUCKETS = frozenset(range(5, 10))


def assign_frequency_buckets(log: ClickLog, n_buckets: int = 10) -> ClickLog:
    """
    Tag every record with its query's frequency bucket.

    Queries are ranked by impression count, most frequent first, ties broken
    by query_id. The query at rank i of Q lands in bucket floor(i * n_buckets / Q),
    so bucket 0 holds the head of the distribution.
    """
    if not 1 <= n_buckets <= MAX_BUCKET + 1:
        raise ValidationError(f"n_buckets must be in [1, {MAX_BUCKET + 1}], got {n_buckets}")
    counts = Counter(r.query_id for r in log.records)
    ranked = sorted(counts, key=lambda q: (-counts[q], q))
    total = len(ranked)
    bucket_of = {q: (i * n_buckets) // total for i, q in enumerate(ranked)}
    records = [replace(r, query_frequency_bucket=bucket_of[r.query_id]) for r in log.records]
    return log.with_records(records)
