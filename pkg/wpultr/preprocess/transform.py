"""
Design matrix construction.

A log becomes Z = [click, r̂, x_1..x_n] with ordinals replaced by their
Bradley-Terry scores, categoricals by embedding rows and continuous features
by z-scores. The column layout maps every node to its column indices.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from wpultr.core.errors import ValidationError
from wpultr.core.models import CLICK, REL, ClickLog, FeatureKind, FeatureSchema, FeatureSpec
from wpultr.preprocess.bradley_terry import (
    BradleyTerryModel,
    fit_bradley_terry,
    ordinal_pairs,
    position_pairs,
)
from wpultr.preprocess.embedding import DEFAULT_DIM, DEFAULT_INIT_SD, EmbeddingTable
from wpultr.preprocess.standardize import Standardizer

logger = logging.getLogger(__name__)

POSITION = "position"


@dataclass(frozen=True)
class PreprocessConfig:
    """Settings for fitting SEPP transforms."""
    bt_lambda: float = 1.0
    embedding_dim: int = DEFAULT_DIM
    embedding_sd: float = DEFAULT_INIT_SD
    seed: int = 0

    def __post_init__(self):
        if not self.bt_lambda > 0:
            raise ValidationError("preprocess.bt_lambda must be positive")
        if self.embedding_dim < 1:
            raise ValidationError("preprocess.embedding_dim must be >= 1")


@dataclass(frozen=True)
class ColumnLayout:
    """Column names of Z and the column indices owned by each node."""
    columns: tuple[str, ...]
    nodes: Mapping[str, tuple[int, ...]]

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "nodes", MappingProxyType(dict(self.nodes)))

    @property
    def width(self) -> int:
        return len(self.columns)

    @property
    def node_names(self) -> tuple[str, ...]:
        return tuple(self.nodes)

    def indices(self, nodes: Iterable[str]) -> list[int]:
        """Column indices for ``nodes``, in layout order.

        Raises:
            ValidationError: For a label the layout does not cover.
        """
        wanted = set(nodes)
        unknown = wanted - set(self.nodes)
        if unknown:
            raise ValidationError(f"unknown node label(s) {sorted(unknown)}")
        return sorted(i for node in wanted for i in self.nodes[node])

    def mask(self, nodes: Iterable[str]) -> np.ndarray:
        mask = np.zeros(self.width, dtype=bool)
        mask[self.indices(nodes)] = True
        return mask

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "nodes": {k: list(v) for k, v in self.nodes.items()}}

    @classmethod
    def from_dict(cls, data: dict) -> "ColumnLayout":
        return cls(tuple(data["columns"]), {k: tuple(v) for k, v in data["nodes"].items()})

    @classmethod
    def build(cls, schema: FeatureSchema, embedding_dims: Mapping[str, int]) -> "ColumnLayout":
        columns = [CLICK, REL]
        nodes: dict[str, tuple[int, ...]] = {CLICK: (0,), REL: (1,)}
        for spec in schema:
            if spec.kind is FeatureKind.CATEGORICAL:
                dim = embedding_dims[spec.name]
                nodes[spec.name] = tuple(range(len(columns), len(columns) + dim))
                columns.extend(f"{spec.name}[{k}]" for k in range(dim))
            else:
                nodes[spec.name] = (len(columns),)
                columns.append(spec.name)
        return cls(tuple(columns), nodes)


@dataclass
class DesignMatrix:
    """Numeric matrix Z with its layout, the raw discrete codes and their declared level counts."""
    values: np.ndarray
    layout: ColumnLayout
    codes: dict[str, np.ndarray] = field(default_factory=dict)
    doc_features: np.ndarray | None = None
    cardinalities: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1, self.layout.width)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def column(self, node: str) -> np.ndarray:
        """The node's columns; single-column nodes come back 1-D."""
        idx = self.layout.indices([node])
        block = self.values[:, idx]
        return block[:, 0] if len(idx) == 1 else block

    def subset(self, rows) -> "DesignMatrix":
        rows = np.asarray(rows)
        return DesignMatrix(
            self.values[rows],
            self.layout,
            {k: v[rows] for k, v in self.codes.items()},
            None if self.doc_features is None else self.doc_features[rows],
            self.cardinalities,
        )

    def with_rel(self, scores) -> "DesignMatrix":
        values = self.values.copy()
        values[:, self.layout.nodes[REL][0]] = np.asarray(scores, dtype=np.float64)
        return DesignMatrix(values, self.layout, self.codes, self.doc_features, self.cardinalities)


def transform_log(
    log: ClickLog,
    bt_models: Mapping[str, BradleyTerryModel],
    embeddings: Mapping[str, EmbeddingTable],
    standardizers: Mapping[str, Standardizer],
    scores: Sequence[float] | None = None,
) -> DesignMatrix:
    """
    Build Z = [click, r̂, transformed SEPP features] for every record.

    Args:
        scores: Relevance scores r̂ per record. Defaults to the logged scores.

    Raises:
        ValidationError: A transform is missing, a categorical level is unseen,
            or no relevance score source is available.
    """
    schema = log.schema
    missing = [
        spec.name for spec in schema
        if (spec.kind is FeatureKind.ORDINAL and spec.name not in bt_models)
        or (spec.kind is FeatureKind.CATEGORICAL and spec.name not in embeddings)
        or (spec.kind is FeatureKind.CONTINUOUS and spec.name not in standardizers)
    ]
    if missing:
        raise ValidationError(f"no fitted transform for feature(s) {missing}")

    layout = ColumnLayout.build(schema, {k: v.dim for k, v in embeddings.items()})
    n = len(log)
    values = np.zeros((n, layout.width), dtype=np.float64)

    values[:, 0] = [r.click for r in log.records]
    if scores is None:
        if n and not log.has_logged_scores:
            raise ValidationError("log has no logged_score; pass relevance scores explicitly")
        scores = [r.logged_score for r in log.records]
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (n,):
        raise ValidationError(f"expected {n} relevance scores, got {scores.shape}")
    values[:, 1] = scores

    codes: dict[str, np.ndarray] = {}
    cardinalities: dict[str, int] = {}
    for spec in schema:
        raw = np.array([r.sepp_values[spec.name] for r in log.records], dtype=np.float64)
        idx = list(layout.nodes[spec.name])
        if spec.kind is not FeatureKind.CONTINUOUS:
            cardinalities[spec.name] = spec.cardinality
        if spec.kind is FeatureKind.ORDINAL:
            codes[spec.name] = raw.astype(np.int64)
            values[:, idx[0]] = bt_models[spec.name].scores_for(codes[spec.name])
        elif spec.kind is FeatureKind.CATEGORICAL:
            codes[spec.name] = raw.astype(np.int64)
            values[:, idx] = embeddings[spec.name].lookup(codes[spec.name])
        else:
            values[:, idx[0]] = standardizers[spec.name].apply(raw)

    doc_features = np.array([r.doc_features for r in log.records], dtype=np.float64)
    doc_features = doc_features.reshape(n, log.doc_feature_dim)
    return DesignMatrix(values, layout, codes, doc_features, cardinalities)


@dataclass
class FittedTransforms:
    """Every fitted SEPP transform of a schema; serializes to ``transforms.json``."""
    schema: FeatureSchema
    bradley_terry: dict[str, BradleyTerryModel] = field(default_factory=dict)
    embeddings: dict[str, EmbeddingTable] = field(default_factory=dict)
    standardizers: dict[str, Standardizer] = field(default_factory=dict)

    @property
    def layout(self) -> ColumnLayout:
        return ColumnLayout.build(self.schema, {k: v.dim for k, v in self.embeddings.items()})

    def apply(self, log: ClickLog, scores: Sequence[float] | None = None) -> DesignMatrix:
        return transform_log(log, self.bradley_terry, self.embeddings, self.standardizers, scores)

    def restrict(self, names: Iterable[str]) -> "FittedTransforms":
        keep = set(names)
        return FittedTransforms(
            self.schema.subset(keep),
            {k: v for k, v in self.bradley_terry.items() if k in keep},
            {k: v for k, v in self.embeddings.items() if k in keep},
            {k: v for k, v in self.standardizers.items() if k in keep},
        )

    def to_dict(self) -> dict:
        return {
            "schema": [spec.declaration() for spec in self.schema],
            "bradley_terry": {k: v.to_dict() for k, v in sorted(self.bradley_terry.items())},
            "embeddings": {k: v.to_dict() for k, v in sorted(self.embeddings.items())},
            "standardizers": {k: v.to_dict() for k, v in sorted(self.standardizers.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FittedTransforms":
        return cls(
            FeatureSchema(tuple(FeatureSpec.parse(d) for d in data["schema"])),
            {k: BradleyTerryModel.from_dict(v) for k, v in data["bradley_terry"].items()},
            {k: EmbeddingTable.from_dict(v, k) for k, v in data["embeddings"].items()},
            {k: Standardizer.from_dict(v) for k, v in data["standardizers"].items()},
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FittedTransforms":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_transforms(log: ClickLog, config: PreprocessConfig | None = None) -> FittedTransforms:
    """Fit a Bradley-Terry model, embedding or standardizer per SEPP feature."""
    config = config or PreprocessConfig()
    fitted = FittedTransforms(log.schema)
    for k, spec in enumerate(log.schema):
        if spec.kind is FeatureKind.ORDINAL:
            pairs = position_pairs(log) if spec.name == POSITION else ordinal_pairs(log, spec.name)
            fitted.bradley_terry[spec.name] = fit_bradley_terry(
                pairs, config.bt_lambda, levels=range(1, spec.cardinality + 1)
            )
            logger.info("Fitted Bradley-Terry scores for %s on %d pairs", spec.name, len(pairs))
        elif spec.kind is FeatureKind.CATEGORICAL:
            table_seed = int(np.random.SeedSequence([config.seed, k]).generate_state(1)[0])
            fitted.embeddings[spec.name] = EmbeddingTable.initialize(
                spec.cardinality, config.embedding_dim, table_seed, config.embedding_sd, spec.name
            )
        else:
            raw = [r.sepp_values[spec.name] for r in log.records]
            fitted.standardizers[spec.name] = Standardizer.fit(raw)
    return fitted
