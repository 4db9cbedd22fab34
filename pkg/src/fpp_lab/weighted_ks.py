"""Weighted two-sample Kolmogorov-Smirnov statistic with bootstrap threshold.

There is no closed-form null distribution once one sample carries
importance weights, so the rejection threshold is estimated by a pooled
bootstrap: both groups are resampled (values together with their weights)
from the pooled collection, which imposes the null hypothesis that the two
weighted samples describe the same law.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def weighted_ks_statistic(x: np.ndarray, wx: np.ndarray, y: np.ndarray, wy: np.ndarray) -> float:
    """sup-distance between the two weighted empirical CDFs."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    wx = np.asarray(wx, dtype=float)
    wy = np.asarray(wy, dtype=float)
    if x.size == 0 or y.size == 0:
        raise ValidationError("KS statistic needs non-empty samples")
    if np.any(wx < 0) or np.any(wy < 0) or wx.sum() <= 0 or wy.sum() <= 0:
        raise ValidationError("weights must be nonnegative with positive totals")
    ox = np.argsort(x, kind="stable")
    oy = np.argsort(y, kind="stable")
    xs, cwx = x[ox], np.cumsum(wx[ox]) / wx.sum()
    ys, cwy = y[oy], np.cumsum(wy[oy]) / wy.sum()
    grid = np.concatenate([xs, ys])
    fx = np.concatenate([[0.0], cwx])[np.searchsorted(xs, grid, side="right")]
    fy = np.concatenate([[0.0], cwy])[np.searchsorted(ys, grid, side="right")]
    return float(np.abs(fx - fy).max())


def ks_bootstrap_threshold(
    x: np.ndarray,
    wx: np.ndarray,
    y: np.ndarray,
    wy: np.ndarray,
    n_boot: int,
    level: float,
    rng: np.random.Generator,
) -> float:
    """(1 - level) quantile of the pooled-bootstrap null KS distribution."""
    if not 0 < level < 1:
        raise ValidationError(f"level must be in (0, 1), got {level}")
    vals = np.concatenate([x, y])
    wts = np.concatenate([wx, wy])
    n, m = len(x), len(y)
    total = n + m
    stats = np.empty(n_boot)
    for b in range(n_boot):
        ia = rng.integers(0, total, n)
        ib = rng.integers(0, total, m)
        stats[b] = weighted_ks_statistic(vals[ia], wts[ia], vals[ib], wts[ib])
    return float(np.quantile(stats, 1.0 - level))
