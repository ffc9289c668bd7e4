"""
Bradley-Terry scores for ordinal SEPP features.

Within a displayed list, a better ordinal level (smaller value, e.g. rank 1)
"beats" every worse one. Fitting a penalized Bradley-Terry model on those wins
maps the levels to continuous scores with p(i beats j) = e^s_i / (e^s_i + e^s_j).

Every pair is won by the better level, so the unpenalized MLE diverges; an L2
penalty keeps the scores finite and centred at 0.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from wpultr.core.errors import ValidationError
from wpultr.core.models import ClickLog

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4


@dataclass
class BradleyTerryModel:
    """Fitted level scores. Levels never observed in a pair score 0."""
    scores: dict[int, float]
    lam: float = 1.0
    fit_trace: list[float] = field(default_factory=list)

    def score(self, level: int) -> float:
        return self.scores.get(int(level), 0.0)

    def scores_for(self, levels: Iterable[int]) -> np.ndarray:
        return np.array([self.score(level) for level in levels], dtype=np.float64)

    def win_probability(self, i: int, j: int) -> float:
        """p(i beats j); ``win_probability(i, j) + win_probability(j, i) == 1`` exactly."""
        diff = self.score(i) - self.score(j)
        # the larger probability lies in [0.5, 1], so its complement is exact
        high = float(expit(abs(diff)))
        if diff >= 0:
            return high
        return 1.0 - high

    @property
    def levels(self) -> list[int]:
        return sorted(self.scores)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "scores": {str(k): v for k, v in sorted(self.scores.items())},
            "fit_trace": list(self.fit_trace),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BradleyTerryModel":
        return cls(
            scores={int(k): float(v) for k, v in data["scores"].items()},
            lam=float(data["lambda"]),
            fit_trace=[float(v) for v in data.get("fit_trace", [])],
        )


def _objective(s: np.ndarray, winners, losers, counts, lam: float) -> float:
    diff = s[winners] - s[losers]
    # log sigma(d) = -log(1 + e^-d)
    return float(-np.sum(counts * np.logaddexp(0.0, -diff)) - 0.5 * lam * np.dot(s, s))


def fit_bradley_terry(
    pairs: Sequence[tuple[int, int]],
    lam: float = 1.0,
    levels: Iterable[int] | None = None,
    tol: float = 1e-8,
    max_iter: int = 200,
) -> BradleyTerryModel:
    """
    Maximize sum log sigma(s_winner - s_loser) - (lam/2) * sum s^2.

    Uses damped Newton steps with Armijo backtracking, so the recorded
    objective trace never decreases, until the gradient norm drops below
    ``tol``.

    Args:
        pairs: (winner_level, loser_level) pairs, with multiplicity.
        lam: L2 penalty weight, must be positive.
        levels: Extra levels to report (scored 0 if they never appear).

    Raises:
        ValidationError: If ``lam`` is not positive.
    """
    if not lam > 0:
        raise ValidationError(f"Bradley-Terry penalty must be positive, got {lam}")

    all_levels = {int(v) for pair in pairs for v in pair}
    if levels is not None:
        all_levels.update(int(v) for v in levels)
    ordered = sorted(all_levels)
    index = {level: k for k, level in enumerate(ordered)}

    tally = Counter((int(w), int(l)) for w, l in pairs if int(w) != int(l))
    keys = sorted(tally)
    winners = np.array([index[w] for w, _ in keys], dtype=np.int64)
    losers = np.array([index[l] for _, l in keys], dtype=np.int64)
    counts = np.array([tally[k] for k in keys], dtype=np.float64)

    n = len(ordered)
    s = np.zeros(n, dtype=np.float64)
    value = _objective(s, winners, losers, counts, lam)
    trace = [value]

    for iteration in range(max_iter):
        diff = s[winners] - s[losers]
        p_loss = expit(-diff)
        grad = -lam * s
        np.add.at(grad, winners, counts * p_loss)
        np.add.at(grad, losers, -counts * p_loss)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < tol:
            break

        curvature = counts * p_loss * (1.0 - p_loss)
        neg_hessian = lam * np.eye(n)
        np.add.at(neg_hessian, (winners, winners), curvature)
        np.add.at(neg_hessian, (losers, losers), curvature)
        np.add.at(neg_hessian, (winners, losers), -curvature)
        np.add.at(neg_hessian, (losers, winners), -curvature)
        step = np.linalg.solve(neg_hessian, grad)

        slope = float(grad @ step)
        t = 1.0
        while True:
            candidate = s + t * step
            candidate_value = _objective(candidate, winners, losers, counts, lam)
            if candidate_value >= value + ARMIJO_C * t * slope:
                break
            t *= 0.5
            if t < 1e-12:
                candidate = None
                break
        if candidate is None:
            logger.debug("Bradley-Terry line search stalled at iteration %d", iteration)
            break
        s, value = candidate, candidate_value
        trace.append(value)

    scores = {level: float(s[k]) for level, k in index.items()}
    logger.debug("Bradley-Terry fit on %d pairs over %d levels", int(counts.sum()), n)
    return BradleyTerryModel(scores=scores, lam=float(lam), fit_trace=trace)


def ordinal_pairs(log: ClickLog, feature: str) -> list[tuple[int, int]]:
    """
    Pairs (better, worse) of an ordinal feature within each displayed list.

    One pair per co-occurring pair of records with distinct levels; smaller
    level values are better.
    """
    pairs: list[tuple[int, int]] = []
    for ranked in log.ranked_lists():
        values = sorted(int(r.sepp_values[feature]) for r in ranked)
        for a in range(len(values)):
            for b in range(a + 1, len(values)):
                if values[a] < values[b]:
                    pairs.append((values[a], values[b]))
    return pairs


def position_pairs(log: ClickLog) -> list[tuple[int, int]]:
    """One (i, j) pair for every positions i < j shown together in a list."""
    pairs: list[tuple[int, int]] = []
    for ranked in log.ranked_lists():
        positions = sorted(r.rank_position for r in ranked)
        for a in range(len(positions)):
            for b in range(a + 1, len(positions)):
                if positions[a] < positions[b]:
                    pairs.append((positions[a], positions[b]))
    return pairs
