"""Conditional density estimators with masked inputs."""

from .estimator import (
    ConditionalEstimator,
    FitHyper,
    FitReport,
    HeadKind,
    default_head,
    fit,
    fit_estimators,
    log_prob,
    mask_input,
    target_kind,
)

__all__ = [
    "ConditionalEstimator",
    "FitHyper",
    "FitReport",
    "HeadKind",
    "default_head",
    "fit",
    "fit_estimators",
    "log_prob",
    "mask_input",
    "target_kind",
]
