"""
Naive click-likelihood trainer.

Every impression is a pointwise example: Δ(f, c) is binary cross-entropy on
sigmoid(f). Clicked rows may carry a weight, which is how IPW reuses this loop.
"""

import logging

import numpy as np
import torch
import torch.nn.functional as F
from tqdm import tqdm

from wpultr.baselines.ranker import RankingModel, TrainHyper
from wpultr.core.mlp import as_tensor
from wpultr.core.models import ClickLog

logger = logging.getLogger(__name__)


def pointwise_loss(scores: torch.Tensor, clicks: torch.Tensor, click_weights: torch.Tensor) -> torch.Tensor:
    """mean(c·w·Δ(f, 1) + (1 − c)·Δ(f, 0)) with Δ(f, y) = BCE(sigmoid(f), y)."""
    positive = F.softplus(-scores)
    negative = F.softplus(scores)
    return (clicks * click_weights * positive + (1.0 - clicks) * negative).mean()


class BatchSampler:
    """Seeded mini-batches that walk through fresh permutations of the rows."""

    def __init__(self, n: int, batch_size: int, seed: int):
        self.n = n
        self.batch_size = min(batch_size, n)
        self.generator = torch.Generator().manual_seed(int(seed))
        self._order = torch.randperm(n, generator=self.generator)
        self._cursor = 0

    def next(self) -> torch.Tensor:
        if self._cursor + self.batch_size > self.n:
            self._order = torch.randperm(self.n, generator=self.generator)
            self._cursor = 0
        idx = self._order[self._cursor:self._cursor + self.batch_size]
        self._cursor += self.batch_size
        return idx


def train_pointwise(
    log: ClickLog,
    click_weights: np.ndarray,
    hyper: TrainHyper,
    model: RankingModel | None = None,
    progress: bool = False,
    trace: list[float] | None = None,
    desc: str = "naive",
) -> RankingModel:
    """
    Run ``hyper.steps`` Adam steps of the weighted pointwise loss.

    Args:
        click_weights: Weight per record applied to clicked rows.
        model: Starting model, trained in place; a fresh seeded model if None.
        trace: When given, receives the batch loss of every step.
    """
    if model is None:
        model = RankingModel(log.doc_feature_dim, hyper.hidden, hyper.seed)
    if hyper.steps == 0 or len(log) == 0:
        return model

    features = as_tensor(np.array([r.doc_features for r in log.records]).reshape(len(log), -1))
    clicks = as_tensor([r.click for r in log.records])
    weights = as_tensor(click_weights)
    optimizer = torch.optim.Adam(model.parameters(), lr=hyper.lr)
    sampler = BatchSampler(len(log), hyper.batch_size, hyper.seed)

    for step in tqdm(range(hyper.steps), desc=desc, disable=not progress):
        idx = sampler.next()
        optimizer.zero_grad()
        loss = pointwise_loss(model.score_tensor(features[idx]), clicks[idx], weights[idx])
        loss.backward()
        optimizer.step()
        if trace is not None:
            trace.append(float(loss.detach()))
        if step % 500 == 0:
            logger.debug("%s step %d: loss %.5f", desc, step, float(loss.detach()))
    return model


def train_naive(
    log: ClickLog,
    hyper: TrainHyper | None = None,
    progress: bool = False,
    trace: list[float] | None = None,
) -> RankingModel:
    """Train a ranker on clicks as if they were relevance labels."""
    hyper = hyper or TrainHyper()
    logger.info("Training naive ranker: %d steps on %d impressions", hyper.steps, len(log))
    return train_pointwise(log, np.ones(len(log)), hyper, progress=progress, trace=trace)
