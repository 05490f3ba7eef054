"""Point splatting: render colored point clouds into posed cameras with a
z-buffer, producing the RGB guidance frames and disocclusion masks.

Rasterization rules
-------------------
- Points at camera-frame depth <= ``Z_NEAR`` are culled.
- A point lands in the pixel containing its projection: column floor(u+0.5),
  row floor(v+0.5) (texel centers sit at integer coordinates).
- ``splat_radius`` grows each point to the axis-aligned screen-space disk of
  integer offsets with dx^2 + dy^2 <= radius^2; radius 0 is a single pixel.
- Per pixel the nearest point wins; depths within ``Z_EPSILON`` of the
  minimum tie-break to the lowest point index.  The rule is order
  independent, so renders are bit-identical across runs and backends.

The projection and culling happen once here in numpy; the kernel backends
only resolve winners from identical integer/depth inputs, which is what
guarantees compiled and fallback paths agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .cache import Cache3D, DepthMap, PointCloud
from .errors import InvalidInput
from .geometry import Camera, Trajectory, project_points

Z_NEAR = 1e-6
Z_EPSILON = 1e-9


@dataclass(frozen=True)
class RenderedFrame:
    """RGB render, coverage mask, and the winning depth per covered pixel.

    For rasterizer output: image is (0, 0, 0) and depth is 0 wherever the
    mask is false, and depth is finite and positive wherever it is true.
    Generator outputs reuse this type with ``mask`` meaning "pixel was
    guided rather than hallucinated".
    """

    image: np.ndarray  # (H, W, 3) float32
    mask: np.ndarray  # (H, W) bool
    depth: np.ndarray  # (H, W) float64

    def __post_init__(self):
        image = np.asarray(self.image, dtype=np.float32)
        mask = np.asarray(self.mask, dtype=bool)
        depth = np.asarray(self.depth, dtype=np.float64)
        if image.ndim != 3 or image.shape[2] != 3:
            raise InvalidInput("image must be (H, W, 3)")
        if mask.shape != image.shape[:2] or depth.shape != image.shape[:2]:
            raise InvalidInput("mask/depth shape must match the image")
        for name, arr in (("image", image), ("mask", mask), ("depth", depth)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def coverage(self) -> float:
        """Fraction of covered pixels."""
        return float(self.mask.mean())


@dataclass(frozen=True)
class GuidanceVideo:
    """One view's rendered frames along a trajectory."""

    frames: tuple[RenderedFrame, ...]
    view_index: int

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if len(self.frames) == 0:
            raise InvalidInput("a guidance video needs at least one frame")


def _rasterize_cloud(points: PointCloud, camera: Camera, splat_radius: float):
    """Project, cull, and resolve winners.  Returns (winner, colors, depths)
    where winner is (H, W) into the culled arrays (-1 = uncovered)."""
    if splat_radius < 0:
        raise InvalidInput("splat_radius must be non-negative")
    h, w = camera.height, camera.width
    if len(points) == 0:
        return np.full((h, w), -1, dtype=np.int64), points.colors, np.zeros(0)
    pixels, z = project_points(points.positions, camera)
    keep = z > Z_NEAR
    # Clamp before the int cast: wildly off-screen projections must stay
    # off-screen instead of wrapping through int64 overflow.
    u = np.clip(pixels[keep, 0], -1e9, 1e9)
    v = np.clip(pixels[keep, 1], -1e9, 1e9)
    ix = np.floor(u + 0.5).astype(np.int64)
    iy = np.floor(v + 0.5).astype(np.int64)
    winner = _kernels.rasterize(ix, iy, z[keep], h, w, float(splat_radius), Z_EPSILON)
    return winner, points.colors[keep], z[keep]


def render(points: PointCloud, camera: Camera, splat_radius: float = 0) -> RenderedFrame:
    """Splat a point cloud into a camera; uncovered pixels are black."""
    winner, colors, depths = _rasterize_cloud(points, camera, splat_radius)
    h, w = winner.shape
    mask = winner >= 0
    image = np.zeros((h, w, 3), dtype=np.float32)
    depth = np.zeros((h, w), dtype=np.float64)
    if mask.any():
        image[mask] = colors[winner[mask]]
        depth[mask] = depths[winner[mask]]
    return RenderedFrame(image=image, mask=mask, depth=depth)


def render_depth(points: PointCloud, camera: Camera, splat_radius: float = 0) -> DepthMap:
    """Splat only depth: the per-pixel nearest point depth, invalid where bare."""
    winner, _, depths = _rasterize_cloud(points, camera, splat_radius)
    mask = winner >= 0
    values = np.zeros(winner.shape, dtype=np.float64)
    if mask.any():
        values[mask] = depths[winner[mask]]
    return DepthMap(values=values, valid=mask)


def render_guidance(
    cache: Cache3D, trajectory: Trajectory, splat_radius: float = 0
) -> list[GuidanceVideo]:
    """Render every cache view along a trajectory.

    The trajectory length must equal the cache's temporal length; time step
    t renders the (t, v) cloud into trajectory frame t.  Views come back in
    cache order.
    """
    if len(trajectory) != cache.length:
        raise InvalidInput(
            f"trajectory length {len(trajectory)} != cache length {cache.length}"
        )
    videos = []
    for v in range(cache.views):
        frames = tuple(
            render(cache.grid[t][v], trajectory[t], splat_radius)
            for t in range(cache.length)
        )
        videos.append(GuidanceVideo(frames=frames, view_index=v))
    return videos
