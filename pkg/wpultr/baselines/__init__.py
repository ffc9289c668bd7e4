"""Reference rankers: naive click training and inverse propensity weighting."""

from .ranker import RankingModel, TrainHyper
from .naive import BatchSampler, pointwise_loss, train_naive, train_pointwise
from .ipw import PropensityTable, estimate_propensity, train_ipw

__all__ = [
    "RankingModel",
    "TrainHyper",
    "BatchSampler",
    "pointwise_loss",
    "train_naive",
    "train_pointwise",
    "PropensityTable",
    "estimate_propensity",
    "train_ipw",
]
