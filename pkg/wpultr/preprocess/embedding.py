"""Continuous embeddings for categorical SEPP features."""

from dataclasses import dataclass

import numpy as np

from wpultr.core.errors import ValidationError

DEFAULT_DIM = 4
DEFAULT_INIT_SD = 0.1


@dataclass
class EmbeddingTable:
    """One row per categorical level."""
    table: np.ndarray
    trainable: bool = False
    feature: str = ""

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.float64)
        if self.table.ndim != 2:
            raise ValidationError(f"embedding table must be 2-D, got shape {self.table.shape}")

    @property
    def cardinality(self) -> int:
        return self.table.shape[0]

    @property
    def dim(self) -> int:
        return self.table.shape[1]

    def lookup(self, codes) -> np.ndarray:
        """Rows for integer level codes.

        Raises:
            ValidationError: naming the first level outside [0, cardinality).
        """
        codes = np.asarray(codes, dtype=np.int64)
        bad = codes[(codes < 0) | (codes >= self.cardinality)]
        if bad.size:
            raise ValidationError(
                f"unseen level {int(bad[0])} for categorical feature "
                f"'{self.feature}' (cardinality {self.cardinality})"
            )
        return self.table[codes]

    @classmethod
    def initialize(
        cls,
        cardinality: int,
        dim: int = DEFAULT_DIM,
        seed: int = 0,
        sd: float = DEFAULT_INIT_SD,
        feature: str = "",
    ) -> "EmbeddingTable":
        rng = np.random.default_rng(seed)
        return cls(rng.normal(0.0, sd, size=(cardinality, dim)), trainable=False, feature=feature)

    def to_dict(self) -> dict:
        return {"table": self.table.tolist(), "trainable": self.trainable}

    @classmethod
    def from_dict(cls, data: dict, feature: str = "") -> "EmbeddingTable":
        table = np.asarray(data["table"], dtype=np.float64)
        if table.size == 0:
            table = table.reshape(0, 0)
        return cls(table, bool(data.get("trainable", False)), feature)
