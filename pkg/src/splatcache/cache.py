"""Colored point clouds lifted from posed RGB-D frames, organized as a
temporal x view grid.

The grid is immutable; "updates" build a new grid that shares the untouched
entries by reference.  A cache built from a single frame stores the *same*
point-cloud object at every time step (shared reference, no copies), which
is what lets static caches broadcast to arbitrary clip lengths.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import fileio
from .errors import InvalidInput
from .geometry import Camera, Intrinsics, Pose, unproject_pixels


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel metric depth with an explicit validity mask.

    ``values`` are camera-frame z in meters; entries where ``valid`` is
    false carry no meaning (they are stored as written, conventionally 0).
    """

    values: np.ndarray  # (H, W) float64
    valid: np.ndarray  # (H, W) bool

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if values.ndim != 2 or values.shape != valid.shape:
            raise InvalidInput("depth values and valid mask must be equal 2-D shapes")
        picked = values[valid]
        if picked.size and (not np.all(np.isfinite(picked)) or np.any(picked <= 0)):
            raise InvalidInput("valid depths must be finite and positive")
        object.__setattr__(self, "values", _readonly(values.copy()))
        object.__setattr__(self, "valid", _readonly(valid.copy()))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class PointCloud:
    """Colored world-space points with source-pixel provenance."""

    positions: np.ndarray  # (N, 3) float64
    colors: np.ndarray  # (N, 3) float32 in [0, 1]
    source_pixel: np.ndarray  # (N, 2) float64, (u, v) in the source image

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        colors = np.asarray(self.colors, dtype=np.float32).reshape(-1, 3)
        source_pixel = np.asarray(self.source_pixel, dtype=np.float64).reshape(-1, 2)
        n = positions.shape[0]
        if colors.shape[0] != n or source_pixel.shape[0] != n:
            raise InvalidInput("positions, colors, source_pixel must agree in length")
        if n and not np.all(np.isfinite(positions)):
            raise InvalidInput("point positions must be finite")
        if n and (colors.min() < 0.0 or colors.max() > 1.0):
            raise InvalidInput("colors must lie in [0, 1]")
        object.__setattr__(self, "positions", _readonly(positions.copy()))
        object.__setattr__(self, "colors", _readonly(colors.copy()))
        object.__setattr__(self, "source_pixel", _readonly(source_pixel.copy()))

    def __len__(self) -> int:
        return self.positions.shape[0]

    @staticmethod
    def empty() -> "PointCloud":
        return PointCloud(
            np.zeros((0, 3)), np.zeros((0, 3), dtype=np.float32), np.zeros((0, 2))
        )


@dataclass(frozen=True)
class PostedFrame:
    """An RGB image with per-pixel depth and the camera that captured it."""

    image: np.ndarray  # (H, W, 3) float32 in [0, 1]
    depth: DepthMap
    camera: Camera

    def __post_init__(self):
        image = np.asarray(self.image, dtype=np.float32)
        h, w = self.camera.height, self.camera.width
        if image.shape != (h, w, 3):
            raise InvalidInput(
                f"image shape {image.shape} does not match camera size {h}x{w}"
            )
        if self.depth.shape != (h, w):
            raise InvalidInput("depth map size does not match camera size")
        object.__setattr__(self, "image", _readonly(image.copy()))


def unproject_frame(frame: PostedFrame) -> PointCloud:
    """Lift every valid-depth pixel of a posed frame to a colored 3-D point.

    Points are emitted in row-major pixel order, one per valid pixel, and
    keep their (u, v) source coordinates for provenance.
    """
    vv, uu = np.nonzero(frame.depth.valid)
    if vv.size == 0:
        return PointCloud.empty()
    pixels = np.stack([uu.astype(np.float64), vv.astype(np.float64)], axis=1)
    depths = frame.depth.values[vv, uu]
    positions = unproject_pixels(pixels, depths, frame.camera)
    colors = frame.image[vv, uu]
    return PointCloud(positions=positions, colors=colors, source_pixel=pixels)


class Cache3D:
    """A length-L by V-view grid of point clouds with their source cameras."""

    def __init__(self, grid, cameras):
        grid = tuple(tuple(row) for row in grid)
        cameras = tuple(tuple(row) for row in cameras)
        if len(grid) == 0 or len(grid[0]) == 0:
            raise InvalidInput("cache must have at least one time step and one view")
        v = len(grid[0])
        for t, row in enumerate(grid):
            if len(row) != v:
                raise InvalidInput(f"time {t} has {len(row)} views, expected {v}")
        if len(cameras) != len(grid) or any(len(r) != v for r in cameras):
            raise InvalidInput("camera grid must match the point-cloud grid")
        self.grid = grid
        self.cameras = cameras

    @property
    def length(self) -> int:
        return len(self.grid)

    @property
    def views(self) -> int:
        return len(self.grid[0])

    def temporally_shared(self) -> bool:
        """True when every time step references the same per-view clouds."""
        first = self.grid[0]
        return all(
            row[v] is first[v] for row in self.grid for v in range(self.views)
        )


def build_single(frame: PostedFrame, length: int) -> Cache3D:
    """Static single-view cache: one cloud shared across ``length`` steps."""
    if length < 1:
        raise InvalidInput("cache length must be at least 1")
    cloud = unproject_frame(frame)
    row = (cloud,)
    cam_row = (frame.camera,)
    return Cache3D(grid=(row,) * length, cameras=(cam_row,) * length)


def build_multiview(frames, length: int) -> Cache3D:
    """Static multi-view cache from posed frames (one view per frame)."""
    frames = list(frames)
    if len(frames) == 0:
        raise InvalidInput("need at least one frame")
    if length < 1:
        raise InvalidInput("cache length must be at least 1")
    row = tuple(unproject_frame(f) for f in frames)
    cam_row = tuple(f.camera for f in frames)
    return Cache3D(grid=(row,) * length, cameras=(cam_row,) * length)


def build_dynamic(videos) -> Cache3D:
    """Dynamic cache from per-view videos: videos[v][t] is a PostedFrame."""
    videos = [list(v) for v in videos]
    if len(videos) == 0 or len(videos[0]) == 0:
        raise InvalidInput("need at least one view with at least one frame")
    length = len(videos[0])
    if any(len(v) != length for v in videos):
        raise InvalidInput("all views must have the same number of frames")
    grid = tuple(
        tuple(unproject_frame(videos[v][t]) for v in range(len(videos)))
        for t in range(length)
    )
    cameras = tuple(
        tuple(videos[v][t].camera for v in range(len(videos))) for t in range(length)
    )
    return Cache3D(grid=grid, cameras=cameras)


def append_view(cache: Cache3D, frame: PostedFrame) -> Cache3D:
    """Add a posed frame as one more static view; existing entries are shared."""
    cloud = unproject_frame(frame)
    grid = tuple(row + (cloud,) for row in cache.grid)
    cameras = tuple(row + (frame.camera,) for row in cache.cameras)
    return Cache3D(grid=grid, cameras=cameras)


def broadcast_temporal(cache: Cache3D, length: int) -> Cache3D:
    """Re-span a temporally shared cache to a new clip length."""
    if length < 1:
        raise InvalidInput("length must be at least 1")
    if not cache.temporally_shared():
        raise InvalidInput("only temporally shared caches can be re-broadcast")
    return Cache3D(grid=(cache.grid[0],) * length, cameras=(cache.cameras[0],) * length)


def slice_time(cache: Cache3D, start: int, end: int) -> Cache3D:
    if not (0 <= start < end <= cache.length):
        raise InvalidInput(f"bad time slice [{start}, {end}) for length {cache.length}")
    return Cache3D(grid=cache.grid[start:end], cameras=cache.cameras[start:end])


# ---------------------------------------------------------------------------
# Directory persistence: cache.json manifest + deduplicated PLY files.


def save_cache(cache: Cache3D, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    names: dict[int, str] = {}
    entries = []
    for t, row in enumerate(cache.grid):
        entry_row = []
        for v, cloud in enumerate(row):
            key = id(cloud)
            if key not in names:
                name = f"cloud_t{t:03d}_v{v:03d}.ply"
                fileio.save_ply(
                    os.path.join(directory, name),
                    cloud.positions,
                    cloud.colors,
                    cloud.source_pixel,
                )
                names[key] = name
            entry_row.append(names[key])
        entries.append(entry_row)

    w = cache.cameras[0][0].width
    h = cache.cameras[0][0].height
    cam_entries = []
    for row in cache.cameras:
        cam_row = []
        for cam in row:
            k = cam.intrinsics
            cam_row.append(
                {
                    "fx": k.fx,
                    "fy": k.fy,
                    "cx": k.cx,
                    "cy": k.cy,
                    "rotation": [float(x) for x in cam.pose.rotation.reshape(-1)],
                    "translation": [float(x) for x in cam.pose.translation],
                }
            )
        cam_entries.append(cam_row)

    manifest = {
        "length": cache.length,
        "views": cache.views,
        "width": w,
        "height": h,
        "clouds": entries,
        "cameras": cam_entries,
    }
    with open(os.path.join(directory, "cache.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)


def load_cache(directory) -> Cache3D:
    manifest_path = os.path.join(directory, "cache.json")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise InvalidInput(f"{directory} has no cache.json") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"cache.json malformed: {exc}") from exc

    try:
        width, height = int(manifest["width"]), int(manifest["height"])
        cloud_names = manifest["clouds"]
        cam_docs = manifest["cameras"]
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"cache.json missing field: {exc}") from exc

    loaded: dict[str, PointCloud] = {}
    grid = []
    for row in cloud_names:
        grid_row = []
        for name in row:
            if name not in loaded:
                positions, colors, source_pixel = fileio.load_ply(
                    os.path.join(directory, name)
                )
                loaded[name] = PointCloud(positions, colors, source_pixel)
            grid_row.append(loaded[name])
        grid.append(tuple(grid_row))

    cameras = []
    for row in cam_docs:
        cam_row = []
        for doc in row:
            intr = Intrinsics(
                fx=float(doc["fx"]),
                fy=float(doc["fy"]),
                cx=float(doc["cx"]),
                cy=float(doc["cy"]),
                width=width,
                height=height,
            )
            pose = Pose(
                np.array(doc["rotation"], dtype=np.float64).reshape(3, 3),
                np.array(doc["translation"], dtype=np.float64),
            )
            cam_row.append(Camera(intr, pose))
        cameras.append(tuple(cam_row))

    return Cache3D(grid=tuple(grid), cameras=tuple(cameras))
