"""Domain data model: feature schema, impression records and click logs."""

import re
from dataclasses import dataclass, field, replace
from enum import Enum as PyEnum
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

from wpultr.core.errors import SchemaMismatchError, ValidationError

REL = "REL"
CLICK = "CLICK"
RESERVED_NODES = (REL, CLICK)

MAX_GRADE = 4
MAX_BUCKET = 9

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def quantize(value: float) -> float:
    """Round a float to the 9 significant digits used on disk."""
    return float(f"{value:.9g}")


class FeatureKind(PyEnum):
    """Data type of a SERP presentation feature."""
    CONTINUOUS = "continuous"
    ORDINAL = "ordinal"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class FeatureSpec:
    """One typed entry of a feature schema."""
    name: str
    kind: FeatureKind
    cardinality: int | None = None

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", FeatureKind(self.kind))
        if not self.name or not _IDENT.match(self.name):
            raise ValidationError(f"feature name must be a non-empty identifier, got {self.name!r}")
        if self.name in RESERVED_NODES:
            raise ValidationError(f"feature name {self.name!r} is reserved")
        if self.kind is FeatureKind.CONTINUOUS:
            if self.cardinality is not None:
                raise ValidationError(f"continuous feature {self.name!r} takes no cardinality")
        elif self.cardinality is None or self.cardinality < 2:
            raise ValidationError(
                f"{self.kind.value} feature {self.name!r} needs cardinality >= 2"
            )

    @property
    def is_discrete(self) -> bool:
        return self.kind is not FeatureKind.CONTINUOUS

    def declaration(self) -> str:
        """Render as a typed column declaration, e.g. ``media:categorical:3``."""
        if self.cardinality is None:
            return f"{self.name}:{self.kind.value}"
        return f"{self.name}:{self.kind.value}:{self.cardinality}"

    @classmethod
    def parse(cls, text: str) -> "FeatureSpec":
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise SchemaMismatchError(f"bad feature declaration {text!r}")
        try:
            kind = FeatureKind(parts[1])
        except ValueError:
            raise SchemaMismatchError(f"unknown feature kind in {text!r}") from None
        cardinality = int(parts[2]) if len(parts) == 3 else None
        return cls(parts[0], kind, cardinality)


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered, uniquely named SEPP feature declarations."""
    entries: tuple[FeatureSpec, ...] = ()

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        names = [e.name for e in entries]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate feature names in schema: {names}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    def __getitem__(self, name: str) -> FeatureSpec:
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise KeyError(name)

    def __contains__(self, name: object) -> bool:
        return name in self.names

    def __iter__(self) -> Iterator[FeatureSpec]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def subset(self, names: Iterable[str]) -> "FeatureSchema":
        """Schema restricted to ``names``, keeping declaration order."""
        keep = set(names)
        return FeatureSchema(tuple(e for e in self.entries if e.name in keep))


@dataclass(frozen=True)
class ImpressionRecord:
    """A single displayed document and the user's click on it.

    Construction does not validate; use ``validate_log`` for diagnostics.
    ``true_relevance`` of ``None`` means unlabeled, distinct from grade 0.
    """
    query_id: str
    doc_id: str
    rank_position: int
    sepp_values: Mapping[str, float]
    doc_features: tuple[float, ...]
    click: int
    true_relevance: int | None = None
    query_frequency_bucket: int | None = None
    session_id: int = 0
    logged_score: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "sepp_values", MappingProxyType(dict(self.sepp_values)))
        object.__setattr__(self, "doc_features", tuple(float(v) for v in self.doc_features))

    @property
    def list_key(self) -> tuple[str, int]:
        """Identity of the displayed ranked list this record belongs to."""
        return (self.query_id, self.session_id)


def _record_sort_key(record: ImpressionRecord) -> tuple:
    return (record.session_id, record.rank_position, record.doc_id, record.click)


@dataclass(frozen=True)
class ClickLog:
    """Records grouped contiguously by query and sorted by (session, rank)."""
    schema: FeatureSchema
    records: tuple[ImpressionRecord, ...] = ()
    grouped_by_query: Mapping[str, tuple[int, int]] = field(default_factory=dict)
    doc_feature_dim: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "grouped_by_query", MappingProxyType(dict(self.grouped_by_query)))
        if self.doc_feature_dim is None:
            dim = len(self.records[0].doc_features) if self.records else 0
            object.__setattr__(self, "doc_feature_dim", dim)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ImpressionRecord]:
        return iter(self.records)

    @property
    def query_ids(self) -> tuple[str, ...]:
        return tuple(self.grouped_by_query)

    def group(self, query_id: str) -> tuple[ImpressionRecord, ...]:
        start, stop = self.grouped_by_query[query_id]
        return self.records[start:stop]

    def groups(self) -> Iterator[tuple[str, tuple[ImpressionRecord, ...]]]:
        for query_id, (start, stop) in self.grouped_by_query.items():
            yield query_id, self.records[start:stop]

    def ranked_lists(self) -> Iterator[tuple[ImpressionRecord, ...]]:
        """Yield each displayed list (one query session) in rank order."""
        for _, records in self.groups():
            current: list[ImpressionRecord] = []
            for record in records:
                if current and record.session_id != current[-1].session_id:
                    yield tuple(current)
                    current = []
                current.append(record)
            if current:
                yield tuple(current)

    @property
    def has_grades(self) -> bool:
        return bool(self.records) and all(r.true_relevance is not None for r in self.records)

    @property
    def has_logged_scores(self) -> bool:
        return bool(self.records) and all(r.logged_score is not None for r in self.records)

    def with_records(self, records: Iterable[ImpressionRecord]) -> "ClickLog":
        return group_queries(records, self.schema, doc_feature_dim=self.doc_feature_dim)

    def select_queries(self, query_ids: Iterable[str]) -> "ClickLog":
        keep = set(query_ids)
        return self.with_records(r for r in self.records if r.query_id in keep)

    def restrict_schema(self, names: Iterable[str]) -> "ClickLog":
        """Drop SEPP features not in ``names`` from schema and records."""
        schema = self.schema.subset(names)
        records = [
            replace(r, sepp_values={k: r.sepp_values[k] for k in schema.names})
            for r in self.records
        ]
        return group_queries(records, schema, doc_feature_dim=self.doc_feature_dim)

    @classmethod
    def empty(cls, schema: FeatureSchema, doc_feature_dim: int = 0) -> "ClickLog":
        return cls(schema, (), {}, doc_feature_dim)


def group_queries(
    records: Iterable[ImpressionRecord],
    schema: FeatureSchema,
    doc_feature_dim: int | None = None,
) -> ClickLog:
    """
    Build a ClickLog with contiguous query groups.

    Groups are ordered by query_id and records inside a group by
    (session_id, rank_position), so the result does not depend on input order.

    Raises:
        SchemaMismatchError: A record's SEPP keys or feature length disagree
            with the schema or with the other records.
    """
    records = list(records)
    names = set(schema.names)
    dims = {len(r.doc_features) for r in records}
    if doc_feature_dim is not None:
        dims.add(doc_feature_dim)
    if len(dims) > 1:
        raise SchemaMismatchError(f"records carry doc_features of mixed lengths {sorted(dims)}")
    for record in records:
        if set(record.sepp_values) != names:
            raise SchemaMismatchError(
                f"record {record.query_id}/{record.doc_id} has SEPP keys "
                f"{sorted(record.sepp_values)}, schema declares {sorted(names)}"
            )

    by_query: dict[str, list[ImpressionRecord]] = {}
    for record in records:
        by_query.setdefault(record.query_id, []).append(record)

    ordered: list[ImpressionRecord] = []
    spans: dict[str, tuple[int, int]] = {}
    for query_id in sorted(by_query):
        group = sorted(by_query[query_id], key=_record_sort_key)
        spans[query_id] = (len(ordered), len(ordered) + len(group))
        ordered.extend(group)

    dim = doc_feature_dim if doc_feature_dim is not None else (dims.pop() if dims else 0)
    return ClickLog(schema, tuple(ordered), spans, dim)
