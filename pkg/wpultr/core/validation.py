"""Log-level invariant checks."""

import math
from dataclasses import dataclass

from wpultr.core.models import MAX_BUCKET, MAX_GRADE, ClickLog, FeatureKind

RULE_RANK = "rank_position ≥ 1"
RULE_UNIQUE_RANK = "rank_position unique within (query_id, session)"
RULE_SEPP_KEYS = "sepp_values keys match schema"
RULE_CATEGORICAL = "categorical value in [0, cardinality)"
RULE_ORDINAL = "ordinal value in [1, cardinality]"
RULE_CONTINUOUS = "continuous value finite"
RULE_CLICK = "click ∈ {0,1}"
RULE_GRADE = "true_relevance ∈ {0..4} or absent"
RULE_BUCKET = "freq_bucket ∈ {0..9} or absent"
RULE_DIM = "doc_features length = doc_feature_dim"
RULE_FINITE = "doc_features finite"
RULE_IDENT = "identifiers non-empty without whitespace"
RULE_GROUPING = "query groups contiguous and sorted"


@dataclass(frozen=True)
class Violation:
    """One broken invariant; ``index`` is the record position or None for log-level rules."""
    index: int | None
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        where = f"record {self.index}" if self.index is not None else "log"
        tail = f" ({self.detail})" if self.detail else ""
        return f"{where}: {self.rule}{tail}"


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _check_identifier(value) -> bool:
    return isinstance(value, str) and value != "" and not any(c.isspace() for c in value)


def validate_log(log: ClickLog) -> list[Violation]:
    """
    Check every record and grouping invariant of a log.

    Returns:
        Violations in record order; empty iff the log is valid.
    """
    violations: list[Violation] = []
    schema = log.schema
    names = set(schema.names)

    for i, record in enumerate(log.records):
        if not (_check_identifier(record.query_id) and _check_identifier(record.doc_id)):
            violations.append(Violation(i, RULE_IDENT, f"{record.query_id!r}/{record.doc_id!r}"))
        if not _is_int(record.rank_position) or record.rank_position < 1:
            violations.append(Violation(i, RULE_RANK, f"got {record.rank_position!r}"))
        if record.click not in (0, 1) or isinstance(record.click, bool):
            violations.append(Violation(i, RULE_CLICK, f"got {record.click!r}"))
        if record.true_relevance is not None and (
            not _is_int(record.true_relevance) or not 0 <= record.true_relevance <= MAX_GRADE
        ):
            violations.append(Violation(i, RULE_GRADE, f"got {record.true_relevance!r}"))
        bucket = record.query_frequency_bucket
        if bucket is not None and (not _is_int(bucket) or not 0 <= bucket <= MAX_BUCKET):
            violations.append(Violation(i, RULE_BUCKET, f"got {bucket!r}"))
        if len(record.doc_features) != log.doc_feature_dim:
            violations.append(
                Violation(i, RULE_DIM, f"{len(record.doc_features)} != {log.doc_feature_dim}")
            )
        elif not all(math.isfinite(v) for v in record.doc_features):
            violations.append(Violation(i, RULE_FINITE))

        if set(record.sepp_values) != names:
            violations.append(Violation(i, RULE_SEPP_KEYS, f"keys {sorted(record.sepp_values)}"))
            continue
        for spec in schema:
            value = record.sepp_values[spec.name]
            if spec.kind is FeatureKind.CATEGORICAL:
                if not _is_int(value) or not 0 <= value < spec.cardinality:
                    violations.append(Violation(i, RULE_CATEGORICAL, f"{spec.name}={value!r}"))
            elif spec.kind is FeatureKind.ORDINAL:
                if not _is_int(value) or not 1 <= value <= spec.cardinality:
                    violations.append(Violation(i, RULE_ORDINAL, f"{spec.name}={value!r}"))
            elif not isinstance(value, (int, float)) or not math.isfinite(value):
                violations.append(Violation(i, RULE_CONTINUOUS, f"{spec.name}={value!r}"))

    violations.extend(_grouping_violations(log))
    return violations


def _grouping_violations(log: ClickLog) -> list[Violation]:
    violations: list[Violation] = []
    covered = 0
    for query_id, (start, stop) in log.grouped_by_query.items():
        if start != covered:
            violations.append(Violation(None, RULE_GROUPING, f"query {query_id} not contiguous"))
        covered = stop
        seen: set[tuple[int, int]] = set()
        previous = None
        for i in range(start, stop):
            record = log.records[i]
            if record.query_id != query_id:
                violations.append(Violation(i, RULE_GROUPING, f"belongs to {record.query_id}"))
                continue
            key = (record.session_id, record.rank_position)
            if key in seen:
                violations.append(
                    Violation(i, RULE_UNIQUE_RANK, f"query {query_id} rank {record.rank_position}")
                )
            seen.add(key)
            if previous is not None and key < previous:
                violations.append(Violation(i, RULE_GROUPING, f"query {query_id} out of order"))
            previous = key
    if covered != len(log.records):
        violations.append(Violation(None, RULE_GROUPING, "records outside any query group"))
    return violations
