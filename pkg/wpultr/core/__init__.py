"""Shared domain model for wpultr."""

from .errors import (
    WpultrError,
    ValidationError,
    SchemaMismatchError,
    MalformedRowError,
    LogValidationError,
    ConfigError,
    TrainingConfigurationError,
    GraphError,
    CyclicGraphError,
    OrientationConflictError,
    EstimationError,
)
from .models import (
    REL,
    CLICK,
    RESERVED_NODES,
    FeatureKind,
    FeatureSpec,
    FeatureSchema,
    ImpressionRecord,
    ClickLog,
    group_queries,
    quantize,
)
from .graph import CausalGraph, Edge, EdgeMark
from .validation import Violation, validate_log

__all__ = [
    "WpultrError",
    "ValidationError",
    "SchemaMismatchError",
    "MalformedRowError",
    "LogValidationError",
    "ConfigError",
    "TrainingConfigurationError",
    "GraphError",
    "CyclicGraphError",
    "OrientationConflictError",
    "EstimationError",
    "REL",
    "CLICK",
    "RESERVED_NODES",
    "FeatureKind",
    "FeatureSpec",
    "FeatureSchema",
    "ImpressionRecord",
    "ClickLog",
    "group_queries",
    "quantize",
    "CausalGraph",
    "Edge",
    "EdgeMark",
    "Violation",
    "validate_log",
]
