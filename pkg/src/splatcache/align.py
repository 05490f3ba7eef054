"""Closed-form scale/shift depth alignment and the depth noise model.

Alignment solves ``min_{s,t} sum_mask (s*d + t - d_tgt)^2`` exactly through
the 2x2 normal equations.  The five reduction sums use exactly rounded
summation (math.fsum), so the result does not depend on pixel order and is
reproducible bit for bit:

    [sum(d*d)  sum(d) ] [s]   [sum(d*d_tgt)]
    [sum(d)    n      ] [t] = [sum(d_tgt)  ]

    det = n*sum(d*d) - sum(d)^2
    s   = (n*sum(d*d_tgt) - sum(d)*sum(d_tgt)) / det
    t   = (sum(d*d)*sum(d_tgt) - sum(d)*sum(d*d_tgt)) / det
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cache import DepthMap
from .errors import IllPosedFit, InvalidInput

# Relative determinant floor below which the 2x2 system counts as singular
# (mask too small or source depth effectively constant).
_DET_RTOL = 1e-12


@dataclass(frozen=True)
class Alignment:
    scale: float
    shift: float
    residual_rms: float
    support: int


def _exact_sum(values: np.ndarray) -> float:
    return math.fsum(values.tolist())


def align_depth(source: DepthMap, target: DepthMap, mask: np.ndarray) -> Alignment:
    """Fit (scale, shift) mapping source depth onto target depth over a mask.

    Only pixels where ``mask`` is true *and* both maps are valid enter the
    fit.  Raises IllPosedFit (carrying the support count) when fewer than
    two pixels survive or the source depth has no spread.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != source.shape or mask.shape != target.shape:
        raise InvalidInput("mask and depth maps must share one shape")
    use = mask & source.valid & target.valid
    d = source.values[use]
    dt = target.values[use]
    n = int(d.size)
    if n < 2:
        raise IllPosedFit(f"alignment needs at least 2 pixels, got {n}", support=n)

    s_x = _exact_sum(d)
    s_y = _exact_sum(dt)
    s_xx = _exact_sum(d * d)
    s_xy = _exact_sum(d * dt)
    det = n * s_xx - s_x * s_x
    if det <= _DET_RTOL * max(1.0, n * s_xx):
        raise IllPosedFit(
            f"source depth is constant over the {n}-pixel mask", support=n
        )
    scale = (n * s_xy - s_x * s_y) / det
    shift = (s_xx * s_y - s_x * s_xy) / det
    residuals = scale * d + shift - dt
    rms = math.sqrt(_exact_sum(residuals * residuals) / n)
    return Alignment(scale=scale, shift=shift, residual_rms=rms, support=n)


def apply_alignment(depth: DepthMap, alignment: Alignment) -> DepthMap:
    """Map depth through s*d + t; results <= 0 become invalid."""
    values = alignment.scale * depth.values + alignment.shift
    valid = depth.valid & (values > 0)
    return DepthMap(values=np.where(valid, values, 0.0), valid=valid)


@dataclass(frozen=True)
class NoiseSpec:
    """Depth-noise recipe: sigma = ratio * (p95 - p05) of the valid depths."""

    ratio: float
    seed: int = 0

    def __post_init__(self):
        if self.ratio < 0:
            raise InvalidInput("noise ratio must be non-negative")


def nearest_rank_percentile(sorted_values: np.ndarray, p: float) -> float:
    """Nearest-rank percentile: the ceil(p*n)-th smallest value (1-indexed)."""
    n = sorted_values.size
    if n == 0:
        raise InvalidInput("percentile of an empty sample")
    k = max(1, math.ceil(p * n))
    return float(sorted_values[min(k, n) - 1])


def add_depth_noise(depth: DepthMap, spec: NoiseSpec) -> DepthMap:
    """Add seeded Gaussian noise scaled by the depth map's 5-95% spread.

    ratio 0 (or a constant depth map, whose spread is 0) returns the input
    values bit-identically.  Noised depths that land <= 0 become invalid.
    """
    vals = depth.values[depth.valid]
    if vals.size == 0 or spec.ratio == 0.0:
        return depth
    ordered = np.sort(vals)
    spread = nearest_rank_percentile(ordered, 0.95) - nearest_rank_percentile(
        ordered, 0.05
    )
    sigma = spec.ratio * spread
    if sigma == 0.0:
        return depth
    noise = np.random.default_rng(spec.seed).normal(0.0, sigma, size=vals.size)
    noised = vals + noise
    values = depth.values.copy()
    values[depth.valid] = noised
    valid = depth.valid & (values > 0)
    return DepthMap(values=np.where(valid, values, 0.0), valid=valid)
