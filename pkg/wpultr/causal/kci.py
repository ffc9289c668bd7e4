"""
Kernel-based conditional independence test.

Gaussian kernels with median-heuristic widths on standardized data. The
unconditional statistic is the centered-kernel trace sum(Kx_c * Ky_c); the
conditional statistic first regresses both kernels on Z with a kernel ridge
smoother R = lam * (Kz + lam I)^-1. Null distributions are two-moment gamma
approximations.

Inputs are put in a canonical form first (x/y order, row order), so the
result is exactly symmetric in (x, y) and invariant to row permutations.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.spatial.distance import pdist, squareform

from wpultr.core.errors import ValidationError

logger = logging.getLogger(__name__)

MIN_ROWS = 20
DEFAULT_CAP = 1000
RIDGE_PER_ROW = 1e-3
EIG_THRESHOLD = 1e-5
Z_SCALE = 0.5


@dataclass(frozen=True)
class KciResult:
    """Outcome of one independence test."""
    statistic: float
    p_value: float
    null_params: tuple[float, float]
    n_used: int
    degenerate: bool = False

    def independent(self, alpha: float) -> bool:
        return self.p_value > alpha


def _as_2d(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    return arr.reshape(-1, 1) if arr.ndim == 1 else arr


def _canonical_pair(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    key_x = np.sort(x, axis=0).tobytes() + bytes([x.shape[1]])
    key_y = np.sort(y, axis=0).tobytes() + bytes([y.shape[1]])
    if key_x != key_y:
        return (x, y) if key_x < key_y else (y, x)
    # same marginal multiset: decide on the row-sorted joint data
    xy = np.hstack([x, y])
    yx = np.hstack([y, x])
    xy_key = xy[np.lexsort(xy.T[::-1])].tobytes()
    yx_key = yx[np.lexsort(yx.T[::-1])].tobytes()
    return (x, y) if xy_key <= yx_key else (y, x)


def _standardize(data: np.ndarray) -> np.ndarray:
    sd = data.std(axis=0)
    sd[sd == 0] = 1.0
    return (data - data.mean(axis=0)) / sd


def gaussian_kernel(data: np.ndarray) -> np.ndarray:
    """Gaussian kernel with width sqrt(0.5 * median squared distance)."""
    sq = pdist(data, "sqeuclidean")
    positive = sq[sq > 0]
    median = float(np.median(positive)) if positive.size else 1.0
    width_sq = 0.5 * median
    return np.exp(-0.5 * squareform(sq) / width_sq)


def _center(kernel: np.ndarray) -> np.ndarray:
    n = kernel.shape[0]
    h = np.eye(n) - 1.0 / n
    return h @ kernel @ h


def _gamma_p_value(statistic: float, mean: float, var: float) -> tuple[float, tuple[float, float]]:
    if not (mean > 0 and var > 0):
        return 1.0, (0.0, 0.0)
    shape = mean ** 2 / var
    scale = var / mean
    p = float(stats.gamma.sf(statistic, shape, loc=0.0, scale=scale))
    return min(max(p, 0.0), 1.0), (shape, scale)


def _eig_features(kernel: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(0.5 * (kernel + kernel.T))
    keep = values > values.max() * EIG_THRESHOLD
    return vectors[:, keep] * np.sqrt(values[keep])


def _unconditional(x: np.ndarray, y: np.ndarray) -> tuple[float, float, tuple[float, float]]:
    n = x.shape[0]
    kx = _center(gaussian_kernel(x))
    ky = _center(gaussian_kernel(y))
    statistic = float(np.sum(kx * ky))
    mean = float(np.trace(kx) * np.trace(ky) / n)
    var = float(2.0 * np.sum(kx ** 2) * np.sum(ky ** 2) / n / n)
    p, params = _gamma_p_value(statistic, mean, var)
    return statistic, p, params


def _conditional(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> tuple[float, float, tuple[float, float]]:
    n = x.shape[0]
    kx = _center(gaussian_kernel(np.hstack([x, Z_SCALE * z])))
    ky = _center(gaussian_kernel(np.hstack([y, Z_SCALE * z])))
    kz = _center(gaussian_kernel(z))
    lam = RIDGE_PER_ROW * n
    rz = lam * np.linalg.solve(kz + lam * np.eye(n), np.eye(n))
    rz = 0.5 * (rz + rz.T)
    kx_r = rz @ kx @ rz
    ky_r = rz @ ky @ rz
    statistic = float(np.sum(kx_r * ky_r))

    fx = _eig_features(kx_r)
    fy = _eig_features(ky_r)
    products = (fx[:, :, None] * fy[:, None, :]).reshape(n, -1)
    if products.shape[1] > n:
        uu = products @ products.T
    else:
        uu = products.T @ products
    mean = float(np.trace(uu))
    var = float(2.0 * np.trace(uu @ uu))
    p, params = _gamma_p_value(statistic, mean, var)
    return statistic, p, params


def kci_test(x, y, z=None, cap: int = DEFAULT_CAP, seed: int = 0) -> KciResult:
    """
    Test x ⟂ y | z.

    Args:
        x, y: Columns (1-D) or column blocks (2-D) of equal length n >= 20.
        z: Conditioning block, or None / zero columns for a marginal test.
        cap: Maximum rows used; larger inputs are subsampled with ``seed``.

    Returns:
        KciResult. Zero-variance x or y yields p_value 1 with ``degenerate`` set.
    """
    x, y = _as_2d(x), _as_2d(y)
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValidationError(f"x and y lengths differ ({n} vs {y.shape[0]})")
    if n < MIN_ROWS:
        raise ValidationError(f"kci_test needs at least {MIN_ROWS} rows, got {n}")
    if cap < MIN_ROWS:
        raise ValidationError(f"kci_test cap must be >= {MIN_ROWS}, got {cap}")
    z = np.zeros((n, 0)) if z is None else _as_2d(z)
    if z.shape[0] != n:
        raise ValidationError(f"z length {z.shape[0]} differs from {n}")

    x, y = _canonical_pair(x, y)
    joint = np.hstack([x, y, z])
    joint = joint[np.lexsort(joint.T[::-1])] if joint.shape[1] else joint
    if n > cap:
        rng = np.random.default_rng(seed)
        joint = joint[np.sort(rng.choice(n, size=cap, replace=False))]
    n_used = joint.shape[0]
    dx, dy = x.shape[1], y.shape[1]
    x, y, z = joint[:, :dx], joint[:, dx:dx + dy], joint[:, dx + dy:]

    if np.any(np.ptp(x, axis=0) == 0) or np.any(np.ptp(y, axis=0) == 0):
        logger.debug("kci_test: zero-variance column, returning independence")
        return KciResult(0.0, 1.0, (0.0, 0.0), n_used, degenerate=True)
    z = z[:, np.ptp(z, axis=0) > 0] if z.shape[1] else z

    x, y = _standardize(x), _standardize(y)
    if z.shape[1]:
        statistic, p, params = _conditional(x, y, _standardize(z))
    else:
        statistic, p, params = _unconditional(x, y)
    return KciResult(statistic, p, params, n_used)
