"""Causal reweighting and gradient-blocked training."""

from .weights import (
    WeightVector,
    feature_weights,
    permutation_log_marginal,
    total_weight,
    weight_case1,
    weight_case2,
    weighted_correlation,
)
from .loss import BlockedStep, blocked_update, reweighted_click_loss, theta_gradient, update_click_head
from .trainer import (
    BAL_METHODS,
    BalConfig,
    BalTrainer,
    RunArtifacts,
    config_for_method,
    fully_biased_graph,
    predefined_graph,
    train_bal,
)

__all__ = [
    "WeightVector",
    "feature_weights",
    "permutation_log_marginal",
    "total_weight",
    "weight_case1",
    "weight_case2",
    "weighted_correlation",
    "BlockedStep",
    "blocked_update",
    "reweighted_click_loss",
    "theta_gradient",
    "update_click_head",
    "BAL_METHODS",
    "BalConfig",
    "BalTrainer",
    "RunArtifacts",
    "config_for_method",
    "fully_biased_graph",
    "predefined_graph",
    "train_bal",
]
