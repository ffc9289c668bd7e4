"""
Importance weights that cut the REL → x → CLICK backdoor.

For a confounded feature x the weight is the target-graph density over the
source-graph density of its observed value:

    case 1 (parents {REL}):      w = p(x) / p(x | r̂)
    case 2 (parents {REL} ∪ m):  w = p(x | m) / p(x | r̂, m)

Both numerators come from in-batch permutation: each row's r̂ is swapped for
every batch member's r̂, uniformly weighted, with the row's other inputs kept.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from scipy.special import logsumexp

from wpultr.core.errors import ValidationError
from wpultr.core.mlp import as_tensor
from wpultr.core.models import REL
from wpultr.density.estimator import ConditionalEstimator
from wpultr.preprocess.transform import DesignMatrix

logger = logging.getLogger(__name__)

DEFAULT_CLIP = (0.1, 10.0)
PAIRS_PER_CHUNK = 1 << 20


@dataclass(frozen=True)
class WeightVector:
    """Raw per-record weights, their clipped values and the mean-1 rescaling."""
    raw: np.ndarray
    clipped: np.ndarray
    normalized: np.ndarray
    clip: tuple[float, float] = DEFAULT_CLIP

    @classmethod
    def from_raw(cls, raw, clip: tuple[float, float] = DEFAULT_CLIP) -> "WeightVector":
        low, high = clip
        if not 0 < low <= 1 <= high:
            raise ValidationError(f"clip bounds must satisfy 0 < low <= 1 <= high, got {clip}")
        raw = np.asarray(raw, dtype=np.float64)
        if raw.size == 0:
            raise ValidationError("cannot build a weight vector from zero records")
        clipped = np.clip(raw, low, high)
        return cls(raw, clipped, clipped / clipped.mean(), (float(low), float(high)))

    @classmethod
    def ones(cls, n: int, clip: tuple[float, float] = DEFAULT_CLIP) -> "WeightVector":
        return cls.from_raw(np.ones(n), clip)

    def __len__(self) -> int:
        return self.raw.shape[0]

    @property
    def clipped_fraction(self) -> float:
        low, high = self.clip
        return float(np.mean((self.raw < low) | (self.raw > high)))

    def stats(self) -> dict[str, float]:
        """Summary of the raw weights, as written to ``weights_stats.csv``."""
        return {
            "mean": float(self.raw.mean()),
            "sd": float(self.raw.std()),
            "min": float(self.raw.min()),
            "max": float(self.raw.max()),
            "clipped_fraction": self.clipped_fraction,
        }


def permutation_log_marginal(est: ConditionalEstimator, Z: DesignMatrix) -> np.ndarray:
    """
    log (1/B) Σ_j p(x_i | r̂_j, rest_i) for every row i of the batch.

    Rows are processed in chunks so at most ``PAIRS_PER_CHUNK`` swapped rows
    exist at once; the reduction order is fixed.
    """
    n = Z.n_rows
    rel_col = Z.layout.indices([REL])[0]
    values = est.target_values(Z)
    rel = Z.values[:, rel_col]
    out = np.empty(n)
    rows_per_chunk = max(1, PAIRS_PER_CHUNK // n)
    for start in range(0, n, rows_per_chunk):
        stop = min(n, start + rows_per_chunk)
        block = np.repeat(Z.values[start:stop], n, axis=0)
        block[:, rel_col] = np.tile(rel, stop - start)
        targets = np.repeat(values[start:stop], n)
        logp = est.log_prob_array(block, targets).reshape(stop - start, n)
        out[start:stop] = logsumexp(logp, axis=1) - np.log(n)
    return out


def _weights(est: ConditionalEstimator, Z: DesignMatrix, clip) -> WeightVector:
    if Z.n_rows < 2:
        raise ValidationError("in-batch marginalization needs a batch of at least 2 rows")
    log_num = permutation_log_marginal(est, Z)
    log_den = est.log_prob_matrix(Z)
    return WeightVector.from_raw(np.exp(log_num - log_den), clip)


def weight_case1(
    est: ConditionalEstimator, Z: DesignMatrix, clip: tuple[float, float] = DEFAULT_CLIP
) -> WeightVector:
    """w = p(x) / p(x | r̂) for a feature whose only parent is REL."""
    if est.parent_set != (REL,):
        raise ValidationError(
            f"case-1 weights need parents {{REL}}, estimator for {est.target} has {est.parent_set}"
        )
    return _weights(est, Z, clip)


def weight_case2(
    est: ConditionalEstimator,
    Z: DesignMatrix,
    other_parents: Sequence[str],
    clip: tuple[float, float] = DEFAULT_CLIP,
) -> WeightVector:
    """w = p(x | m) / p(x | r̂, m) for a feature with parents {REL} ∪ m."""
    other = set(other_parents)
    if not other:
        raise ValidationError("case-2 weights need at least one non-REL parent; use case 1")
    if set(est.parent_set) != other | {REL}:
        raise ValidationError(
            f"estimator parents {est.parent_set} differ from REL plus {sorted(other)}"
        )
    return _weights(est, Z, clip)


def feature_weights(
    est: ConditionalEstimator, Z: DesignMatrix, clip: tuple[float, float] = DEFAULT_CLIP
) -> WeightVector:
    """Pick case 1 or case 2 from the estimator's parent set."""
    others = [p for p in est.parent_set if p != REL]
    if others:
        return weight_case2(est, Z, others, clip)
    return weight_case1(est, Z, clip)


def total_weight(
    vectors: Sequence[WeightVector | np.ndarray],
    clip: tuple[float, float] = DEFAULT_CLIP,
    n: int | None = None,
) -> WeightVector:
    """
    Elementwise product of raw weights, then clip and normalize.

    With no vectors the result is all ones of length ``n``.
    """
    raws = [v.raw if isinstance(v, WeightVector) else np.asarray(v, dtype=np.float64)
            for v in vectors]
    if not raws:
        if n is None:
            raise ValidationError("total_weight needs vectors or a length")
        return WeightVector.ones(n, clip)
    lengths = {r.shape[0] for r in raws}
    if len(lengths) > 1:
        raise ValidationError(f"weight vectors have different lengths {sorted(lengths)}")
    result = WeightVector.from_raw(np.prod(np.vstack(raws), axis=0), clip)
    if result.clipped_fraction > 0.5:
        logger.warning("%.0f%% of weights hit the clip bounds %s",
                       100 * result.clipped_fraction, clip)
    return result


def weighted_correlation(x, y, weights) -> float:
    """Pearson correlation of x and y under nonnegative sample weights."""
    x, y, w = (np.asarray(a, dtype=np.float64) for a in (x, y, weights))
    w = w / w.sum()
    mx, my = np.sum(w * x), np.sum(w * y)
    cov = np.sum(w * (x - mx) * (y - my))
    var = np.sum(w * (x - mx) ** 2) * np.sum(w * (y - my) ** 2)
    return float(cov / np.sqrt(var)) if var > 0 else 0.0


def as_weight_tensor(weights: WeightVector | np.ndarray) -> torch.Tensor:
    if isinstance(weights, WeightVector):
        return as_tensor(weights.normalized)
    return as_tensor(weights)
