"""Pure-numpy z-buffer resolution (fallback kernel).

Implements the contract documented in the package ``__init__``: two
order-independent reductions (depth minimum, then lowest qualifying index),
so repeated runs and the compiled kernel agree bit for bit.
"""

import math

import numpy as np


def disk_offsets(radius: float) -> np.ndarray:
    """Integer (dx, dy) offsets with dx^2 + dy^2 <= radius^2, row-major order."""
    r = float(radius)
    if r < 0:
        raise ValueError("radius must be non-negative")
    rint = int(math.floor(r))
    offs = [
        (dx, dy)
        for dy in range(-rint, rint + 1)
        for dx in range(-rint, rint + 1)
        if dx * dx + dy * dy <= r * r
    ]
    return np.asarray(offs, dtype=np.int64).reshape(-1, 2)


def rasterize(
    ix: np.ndarray,
    iy: np.ndarray,
    depth: np.ndarray,
    height: int,
    width: int,
    radius: float,
    z_eps: float,
) -> np.ndarray:
    """Resolve per-pixel winners; returns (H, W) int64, -1 where uncovered."""
    n = ix.shape[0]
    if n == 0:
        return np.full((height, width), -1, dtype=np.int64)
    offs = disk_offsets(radius)
    px = ix[:, None] + offs[None, :, 0]
    py = iy[:, None] + offs[None, :, 1]
    ok = (px >= 0) & (px < width) & (py >= 0) & (py < height)
    lin = (py * width + px)[ok]
    d = np.broadcast_to(depth[:, None], px.shape)[ok]
    idx = np.broadcast_to(np.arange(n, dtype=np.int64)[:, None], px.shape)[ok]

    zmin = np.full(height * width, np.inf)
    np.minimum.at(zmin, lin, d)

    qualifies = d <= zmin[lin] + z_eps
    winner = np.full(height * width, n, dtype=np.int64)
    np.minimum.at(winner, lin[qualifies], idx[qualifies])
    winner[winner == n] = -1
    return winner.reshape(height, width)
