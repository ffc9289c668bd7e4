"""SEPP feature preprocessing."""

from .bradley_terry import BradleyTerryModel, fit_bradley_terry, ordinal_pairs, position_pairs
from .embedding import EmbeddingTable
from .standardize import Standardizer
from .transform import (
    ColumnLayout,
    DesignMatrix,
    FittedTransforms,
    PreprocessConfig,
    fit_transforms,
    transform_log,
)

__all__ = [
    "BradleyTerryModel",
    "fit_bradley_terry",
    "ordinal_pairs",
    "position_pairs",
    "EmbeddingTable",
    "Standardizer",
    "ColumnLayout",
    "DesignMatrix",
    "FittedTransforms",
    "PreprocessConfig",
    "fit_transforms",
    "transform_log",
]
