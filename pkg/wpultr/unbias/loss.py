"""
Reweighted click likelihood and the gradient-blocked ranker update.

The click head p(c | parents; φ_c) sees REL through its r̂ input. In the
blocked update Θ is trained only through that input: SEPP inputs are
constants, φ_c is frozen, and gradients are taken with respect to Θ alone.
"""

import logging
from dataclasses import dataclass

import numpy as np
import torch

from wpultr.baselines.ranker import RankingModel
from wpultr.core.errors import TrainingConfigurationError, ValidationError
from wpultr.core.mlp import as_tensor
from wpultr.core.models import CLICK, REL
from wpultr.density.estimator import ConditionalEstimator, HeadKind
from wpultr.preprocess.transform import DesignMatrix
from wpultr.unbias.weights import WeightVector, as_weight_tensor

logger = logging.getLogger(__name__)

BLOCKING_MODES = ("reference", "observed")


def _check_head(head: ConditionalEstimator) -> None:
    if head.head is not HeadKind.BERNOULLI or head.target != CLICK:
        raise TrainingConfigurationError("the click head must be a bernoulli estimator of CLICK")


def _inputs(head: ConditionalEstimator, Z: DesignMatrix, rel, mode: str) -> torch.Tensor:
    if mode == "reference":
        base = np.broadcast_to(head.reference, Z.values.shape).copy()
    elif mode == "observed":
        base = Z.values.copy()
    else:
        raise ValidationError(f"unknown blocking mode {mode!r}; expected one of {BLOCKING_MODES}")
    inputs = as_tensor(base)
    rel_col = Z.layout.indices([REL])[0]
    if rel is None:
        rel = as_tensor(Z.values[:, rel_col])
    inputs[:, rel_col] = rel
    return inputs


def reweighted_click_loss(
    click_head: ConditionalEstimator,
    Z: DesignMatrix,
    weights: WeightVector | np.ndarray,
    rel: torch.Tensor | None = None,
) -> torch.Tensor:
    """
    −(1/B) Σ w · log p(c | parents) as a differentiable scalar.

    Args:
        weights: A WeightVector (its normalized values are used) or raw
            per-row weights used as given.
        rel: Relevance scores to feed the r̂ input; defaults to Z's REL
            column. Pass ranker scores with grad to reach Θ.
    """
    _check_head(click_head)
    inputs = _inputs(click_head, Z, rel, "observed")
    clicks = as_tensor(Z.column(CLICK))
    w = as_weight_tensor(weights)
    if w.shape[0] != Z.n_rows:
        raise ValidationError(f"{w.shape[0]} weights for a batch of {Z.n_rows} rows")
    return -(w * click_head.log_prob_tensor(inputs, clicks)).mean()


def update_click_head(
    click_head: ConditionalEstimator,
    Z: DesignMatrix,
    weights: WeightVector | np.ndarray,
    optimizer: torch.optim.Optimizer,
    rel=None,
) -> float:
    """One φ_c step on the reweighted loss; ``rel`` is treated as data."""
    rel_t = None if rel is None else as_tensor(rel).detach()
    optimizer.zero_grad()
    loss = reweighted_click_loss(click_head, Z, weights, rel_t)
    loss.backward()
    optimizer.step()
    return float(loss.detach())


@dataclass
class BlockedStep:
    loss: float
    grad_norm: float
    grads: list[torch.Tensor]


def theta_gradient(
    ranker: RankingModel,
    click_head: ConditionalEstimator,
    Z: DesignMatrix,
    weights: WeightVector | np.ndarray,
    mode: str = "reference",
) -> tuple[torch.Tensor, list[torch.Tensor]]:
    """Loss and its gradient with respect to Θ only, with SEPP inputs held constant."""
    _check_head(click_head)
    if REL not in click_head.parent_set:
        raise TrainingConfigurationError(
            f"click head parents {click_head.parent_set} lack REL; Θ would get no signal"
        )
    if Z.doc_features is None:
        raise ValidationError("batch carries no document features for the ranker")
    rel = ranker.score_tensor(as_tensor(Z.doc_features))
    inputs = _inputs(click_head, Z, rel, mode)
    clicks = as_tensor(Z.column(CLICK))
    w = as_weight_tensor(weights)
    loss = -(w * click_head.log_prob_tensor(inputs, clicks)).mean()
    grads = torch.autograd.grad(loss, ranker.parameters(), allow_unused=True)
    params = ranker.parameters()
    grads = [torch.zeros_like(p) if g is None else g for p, g in zip(params, grads)]
    return loss.detach(), grads


def blocked_update(
    ranker: RankingModel,
    click_head: ConditionalEstimator,
    Z: DesignMatrix,
    weights: WeightVector | np.ndarray,
    lr: float,
    mode: str = "reference",
    optimizer: torch.optim.Optimizer | None = None,
) -> BlockedStep:
    """
    Update Θ through the r̂ input of the click head only.

    ``mode="reference"`` feeds the head's reference vector for every non-REL
    input, so the Θ-gradient depends on the batch only through document
    features, clicks and weights. ``mode="observed"`` feeds the batch's own
    SEPP values as constants. Without an optimizer a plain gradient step of
    size ``lr`` is taken.

    Raises:
        TrainingConfigurationError: The click head has no REL parent.
    """
    loss, grads = theta_gradient(ranker, click_head, Z, weights, mode)
    norm = float(torch.sqrt(sum((g ** 2).sum() for g in grads)))
    with torch.no_grad():
        if optimizer is not None:
            for param, grad in zip(ranker.parameters(), grads):
                param.grad = grad.clone()
            optimizer.step()
        elif lr != 0:
            for param, grad in zip(ranker.parameters(), grads):
                param.sub_(lr * grad)
    return BlockedStep(float(loss), norm, grads)
