"""Chunked autoregressive generation driven by the point cache.

A long trajectory is split into chunks that overlap by exactly one frame;
the overlap frame is authoritative from the earlier chunk.  After each chunk
(except the last) the chunk's final frame is depth-estimated, aligned to the
cache by the closed-form scale/shift fit, and appended to the cache as one
more view, so later chunks see geometry the earlier chunks generated.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from . import fileio
from .align import Alignment, align_depth, apply_alignment
from .cache import (
    Cache3D,
    DepthMap,
    PostedFrame,
    append_view,
    broadcast_temporal,
    slice_time,
)
from .errors import IllPosedFit, InvalidInput, PipelineError
from .fusion import GeneratorInterface, fuse_explicit, generate
from .geometry import Camera, Trajectory
from .splat import RenderedFrame, render_depth, render_guidance


@dataclass(frozen=True)
class ChunkPlan:
    """Half-open [start, end) chunks tiling a clip with one-frame overlaps."""

    chunks: tuple[tuple[int, int], ...]
    chunk_len: int


def plan_chunks(total: int, chunk_len: int) -> ChunkPlan:
    """Plan chunks of at most ``chunk_len`` frames overlapping by one.

    The first chunk starts at 0; each later chunk starts at the previous
    end minus one.  Because of the overlap, a trailing chunk always has at
    least two frames (a single leftover frame cannot occur for total >= 2).
    """
    if total < 1:
        raise InvalidInput("total frame count must be at least 1")
    if chunk_len < 2:
        raise InvalidInput("chunk length must be at least 2")
    chunks = [(0, min(chunk_len, total))]
    while chunks[-1][1] < total:
        start = chunks[-1][1] - 1
        chunks.append((start, min(start + chunk_len, total)))
    return ChunkPlan(chunks=tuple(chunks), chunk_len=chunk_len)


class DepthProvider(Protocol):
    """Monocular-depth stand-in: depth for a generated frame at a camera."""

    def depth_for(self, frame_index: int, image: np.ndarray, camera: Camera) -> DepthMap:
        ...


class OracleDepthProvider:
    """Exact depth from a synthetic scene (ignores the image content)."""

    def __init__(self, scene, time_of_frame: Callable[[int], int] | None = None):
        self.scene = scene
        self.time_of_frame = time_of_frame or (lambda i: 0)

    def depth_for(self, frame_index: int, image: np.ndarray, camera: Camera) -> DepthMap:
        from .synthworld import raster_ground_truth

        _, depth = raster_ground_truth(
            self.scene, camera, time=self.time_of_frame(frame_index)
        )
        return depth


class DirectoryDepthProvider:
    """Reads frame_###.pfm files from a directory by frame index."""

    def __init__(self, directory):
        self.directory = directory

    def depth_for(self, frame_index: int, image: np.ndarray, camera: Camera) -> DepthMap:
        path = os.path.join(self.directory, f"frame_{frame_index:03d}.pfm")
        if not os.path.exists(path):
            raise InvalidInput(f"no depth file {path}")
        values, valid = fileio.load_pfm(path)
        return DepthMap(values=np.where(valid, values, 0.0), valid=valid)


@dataclass
class AutoregressResult:
    frames: list[RenderedFrame]
    plan: ChunkPlan
    alignments: list[Alignment]
    coverage: list[float]  # per chunk: mean across-frames union mask fraction

    @property
    def views_added(self) -> int:
        return len(self.alignments)


def _union_coverage(guidance) -> float:
    length = len(guidance[0].frames)
    fractions = []
    for t in range(length):
        union = np.zeros_like(guidance[0].frames[t].mask)
        for g in guidance:
            union |= g.frames[t].mask
        fractions.append(union.mean())
    return float(np.mean(fractions))


def run_autoregressive(
    cache: Cache3D,
    trajectory: Trajectory,
    generator: GeneratorInterface | None = None,
    depth_provider: DepthProvider | None = None,
    chunk_len: int = 14,
    splat_radius: float = 0,
    update_cache: bool = True,
) -> AutoregressResult:
    """Generate a full trajectory chunk by chunk.

    The cache must either be temporally shared (static: re-broadcast to each
    chunk's span) or have exactly one time step per trajectory frame.  Each
    chunk after the first drops its overlap frame from the output, so the
    result has exactly one frame per trajectory frame and the overlap frame
    keeps the earlier chunk's pixels.
    """
    total = len(trajectory)
    plan = plan_chunks(total, chunk_len)
    shared = cache.temporally_shared()
    if not shared and cache.length != total:
        raise InvalidInput(
            f"dynamic cache length {cache.length} must match trajectory length {total}"
        )
    if update_cache and len(plan.chunks) > 1 and depth_provider is None:
        raise InvalidInput("cache updates need a depth provider")

    work = cache
    frames_out: list[RenderedFrame] = []
    alignments: list[Alignment] = []
    coverage: list[float] = []

    for ci, (start, end) in enumerate(plan.chunks):
        span = end - start
        sub_traj = trajectory[start:end]
        chunk_cache = (
            broadcast_temporal(work, span) if shared else slice_time(work, start, end)
        )
        guidance = render_guidance(chunk_cache, sub_traj, splat_radius)
        coverage.append(_union_coverage(guidance))
        gen_frames = generate(guidance, generator)
        if len(gen_frames) != span:
            raise PipelineError(
                f"generator returned {len(gen_frames)} frames for a {span}-frame chunk",
                chunk_index=ci,
            )
        frames_out.extend(gen_frames if ci == 0 else gen_frames[1:])

        if update_cache and ci < len(plan.chunks) - 1:
            last_cam = sub_traj[span - 1]
            image = gen_frames[-1].image
            raw_depth = depth_provider.depth_for(end - 1, image, last_cam)
            merged = fuse_explicit(list(chunk_cache.grid[span - 1]))
            cache_depth = render_depth(merged, last_cam, splat_radius)
            fit_mask = cache_depth.valid & raw_depth.valid
            try:
                alignment = align_depth(raw_depth, cache_depth, fit_mask)
            except IllPosedFit as exc:
                raise PipelineError(
                    f"chunk {ci}: depth alignment ill-posed ({exc})", chunk_index=ci
                ) from exc
            aligned = apply_alignment(raw_depth, alignment)
            alignments.append(alignment)
            work = append_view(
                work, PostedFrame(image=image, depth=aligned, camera=last_cam)
            )

    return AutoregressResult(
        frames=frames_out, plan=plan, alignments=alignments, coverage=coverage
    )


# ---------------------------------------------------------------------------
# Training-pair curation


@dataclass(frozen=True)
class PairedSample:
    """Cache-building frames plus a target window for supervision."""

    cache_inputs: tuple[PostedFrame, ...]
    selected_indices: tuple[int, ...]
    window: tuple[int, int]  # half-open frame range of the target clip
    target_frames: tuple[PostedFrame, ...]
    target_cameras: Trajectory


def curate_pair(
    video: Sequence[PostedFrame], views: int, length: int, seed: int = 0
) -> PairedSample:
    """Pick equally spaced cache views and a seeded target window.

    ``views`` frames at indices round(i * (N-1) / (views-1)) (just frame 0
    when views == 1) become cache inputs; the target is a ``length``-frame
    window drawn uniformly (seeded) among windows containing at least one
    selected frame.
    """
    video = list(video)
    n = len(video)
    if not 1 <= views <= 4:
        raise InvalidInput("views must be in 1..4")
    if n < 1 or views > n:
        raise InvalidInput(f"cannot pick {views} views from {n} frames")
    if not 1 <= length <= n:
        raise InvalidInput(f"window length {length} not in 1..{n}")
    if views == 1:
        selected = [0]
    else:
        selected = [
            int(math.floor(i * (n - 1) / (views - 1) + 0.5)) for i in range(views)
        ]
    starts = [
        s
        for s in range(n - length + 1)
        if any(s <= i <= s + length - 1 for i in selected)
    ]
    rng = np.random.default_rng(seed)
    start = starts[int(rng.integers(len(starts)))]
    window_frames = tuple(video[start : start + length])
    return PairedSample(
        cache_inputs=tuple(video[i] for i in selected),
        selected_indices=tuple(selected),
        window=(start, start + length),
        target_frames=window_frames,
        target_cameras=Trajectory([f.camera for f in window_frames]),
    )
