"""
Inverse propensity weighting under the examination hypothesis.

Propensities are CTR ratios against the top position, made nonincreasing
by a count-weighted isotonic fit. This is an offline approximation; no
result randomization is involved.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import isotonic_regression

from wpultr.baselines.naive import train_pointwise
from wpultr.baselines.ranker import RankingModel, TrainHyper
from wpultr.core.errors import EstimationError, ValidationError
from wpultr.core.models import ClickLog

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PropensityTable:
    """Examination propensity per rank position, position 1 first."""
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValidationError("propensity table is empty")
        if any(not 0 < v <= 1 for v in self.values):
            raise ValidationError("propensities must lie in (0, 1]")

    @property
    def max_position(self) -> int:
        return len(self.values)

    def propensity(self, position: int) -> float:
        if not 1 <= position <= self.max_position:
            raise ValidationError(f"no propensity for position {position}")
        return self.values[position - 1]

    def click_weights(self, log: ClickLog) -> np.ndarray:
        """1 / propensity(rank_position) per record."""
        return np.array([1.0 / self.propensity(r.rank_position) for r in log.records])

    @classmethod
    def identity(cls, max_position: int) -> "PropensityTable":
        return cls((1.0,) * max_position)

    def to_dict(self) -> dict:
        return {"position": list(range(1, self.max_position + 1)), "propensity": list(self.values)}


def estimate_propensity(log: ClickLog, floor: float = 0.01) -> PropensityTable:
    """
    propensity(k) = CTR(k) / CTR(1), projected to nonincreasing and floored.

    Raises:
        ValidationError: Some position between 1 and the deepest one has no impressions.
        EstimationError: No clicks at position 1.
    """
    positions = np.array([r.rank_position for r in log.records], dtype=np.int64)
    clicks = np.array([r.click for r in log.records], dtype=np.float64)
    if positions.size == 0:
        raise ValidationError("cannot estimate propensities from an empty log")
    depth = int(positions.max())
    counts = np.bincount(positions, minlength=depth + 1)[1:]
    missing = [k + 1 for k in np.flatnonzero(counts == 0)]
    if missing:
        raise ValidationError(f"no impressions at position(s) {missing}")
    ctr = np.bincount(positions, weights=clicks, minlength=depth + 1)[1:] / counts
    if ctr[0] == 0:
        raise EstimationError("CTR at position 1 is zero; propensities are undefined")

    ratio = ctr / ctr[0]
    fitted = isotonic_regression(ratio, weights=counts.astype(np.float64), increasing=False).x
    fitted = np.maximum(fitted / fitted[0], floor)
    fitted = np.minimum(fitted, 1.0)
    logger.info("Propensities: %s", ", ".join(f"{v:.3f}" for v in fitted))
    return PropensityTable(tuple(fitted))


def train_ipw(
    log: ClickLog,
    propensity: PropensityTable,
    hyper: TrainHyper | None = None,
    progress: bool = False,
    trace: list[float] | None = None,
) -> RankingModel:
    """Pointwise training with clicked rows weighted by 1 / propensity(position)."""
    hyper = hyper or TrainHyper()
    weights = propensity.click_weights(log)
    logger.info("Training IPW ranker: %d steps, max click weight %.2f",
                hyper.steps, float(weights.max()) if weights.size else 1.0)
    return train_pointwise(log, weights, hyper, progress=progress, trace=trace, desc="ipw")
