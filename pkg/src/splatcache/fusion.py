"""Latent-space fusion of multi-view guidance renders.

The encoder here is a deliberately simple stand-in for a video VAE with the
same *interface geometry* as the real thing: non-overlapping p x p patch
means per channel, a latent grid of (H/p, W/p) cells, and binary cell masks
that survive only where every pixel of the cell is covered.  On top of it:

- per-view conditioning: masked latent concatenated with a shared noisy
  latent, mapped by a seeded affine layer ("in-layer");
- fusion across views by elementwise max pooling (permutation invariant),
  with channel concatenation and explicit point-cloud merging as the
  ablation alternatives;
- a deterministic generator interface with two reference implementations
  used for testing and desk-scale experiments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from . import fileio
from .cache import PointCloud
from .errors import InvalidInput
from .splat import GuidanceVideo, RenderedFrame

DEFAULT_PATCH = 8
DEFAULT_CHANNELS = 4


@dataclass(frozen=True)
class LatentVideo:
    """Latent tensor (L, C, h, w) plus the patch factor that produced it."""

    values: np.ndarray
    patch: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 4:
            raise InvalidInput("latent values must be (L, C, h, w)")
        object.__setattr__(self, "values", values)

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class LatentMask:
    """Binary cell mask (L, 1, h, w); 1 = every pixel of the cell covered."""

    values: np.ndarray
    patch: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 4 or values.shape[1] != 1:
            raise InvalidInput("latent mask must be (L, 1, h, w)")
        if values.size and not np.all((values == 0.0) | (values == 1.0)):
            raise InvalidInput("latent mask must be binary")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class FusedFeatures:
    """Per-cell fused conditioning features, (L, F, h, w)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 4:
            raise InvalidInput("fused features must be (L, F, h, w)")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class NoiseSchedulePoint:
    """One diffusion step: z_tau = alpha * z0 + sigma * eps, eps ~ N(0, 1)."""

    tau: float
    alpha: float
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise InvalidInput("tau must lie in [0, 1]")
        if self.alpha * self.alpha + self.sigma * self.sigma < 1e-12:
            raise InvalidInput("alpha^2 + sigma^2 must be bounded away from zero")


@dataclass(frozen=True)
class InLayerWeights:
    """Affine map applied per latent cell: out = W @ concat(masked, noisy) + b."""

    weight: np.ndarray  # (F, 2C)
    bias: np.ndarray  # (F,)

    def __post_init__(self):
        weight = np.asarray(self.weight, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        if weight.ndim != 2 or weight.shape[1] % 2 != 0:
            raise InvalidInput("weight must be (F, 2C)")
        if bias.shape != (weight.shape[0],):
            raise InvalidInput("bias must be (F,)")
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)

    @property
    def features(self) -> int:
        return self.weight.shape[0]

    @property
    def channels(self) -> int:
        return self.weight.shape[1] // 2

    @staticmethod
    def from_seed(channels: int, features: int, seed: int) -> "InLayerWeights":
        """Seeded init: PCG64 standard normals scaled by 1/sqrt(2C), zero bias."""
        rng = np.random.default_rng(seed)
        weight = rng.standard_normal((features, 2 * channels)) / np.sqrt(2 * channels)
        return InLayerWeights(weight=weight, bias=np.zeros(features))

    @staticmethod
    def identity(channels: int) -> "InLayerWeights":
        """F = 2C passthrough: output is exactly concat(masked, noisy)."""
        return InLayerWeights(weight=np.eye(2 * channels), bias=np.zeros(2 * channels))

    def save(self, path) -> None:
        packed = np.concatenate([self.weight, self.bias[:, None]], axis=1)
        fileio.save_container(path, packed[None, :, :, None])

    @staticmethod
    def load(path) -> "InLayerWeights":
        packed = fileio.load_container(path)
        if packed.shape[0] != 1 or packed.shape[3] != 1 or packed.shape[2] < 3:
            raise InvalidInput("not an in-layer weight container")
        packed = packed[0, :, :, 0]
        return InLayerWeights(weight=packed[:, :-1], bias=packed[:, -1])


# ---------------------------------------------------------------------------
# Encoding


def _video_array(video) -> np.ndarray:
    """Normalize list-of-frames / array input to (L, H, W, 3) float64."""
    if isinstance(video, np.ndarray):
        arr = np.asarray(video, dtype=np.float64)
        if arr.ndim == 3:
            arr = arr[None]
    else:
        frames = list(video)
        if len(frames) == 0:
            raise InvalidInput("empty video")
        imgs = [f.image if isinstance(f, RenderedFrame) else np.asarray(f) for f in frames]
        arr = np.stack([np.asarray(i, dtype=np.float64) for i in imgs], axis=0)
    if arr.ndim != 4 or arr.shape[3] != 3:
        raise InvalidInput("video must be (L, H, W, 3)")
    return arr


def _check_patch(h: int, w: int, patch: int) -> None:
    if patch < 1:
        raise InvalidInput("patch factor must be >= 1")
    if h % patch or w % patch:
        raise InvalidInput(f"image size {h}x{w} not divisible by patch {patch}")


def encode(video, patch: int = DEFAULT_PATCH, channels: int = DEFAULT_CHANNELS) -> LatentVideo:
    """Patch-mean encoder.

    Channels 0..min(C,3)-1 are per-channel patch means; channel 3 (when
    C = 4) is the patch mean of the flat luminance (r + g + b) / 3.  With
    patch 1 and C = 3 the latent equals the image exactly.
    """
    arr = _video_array(video)
    length, h, w, _ = arr.shape
    _check_patch(h, w, patch)
    if not 1 <= channels <= 4:
        raise InvalidInput("channels must be in 1..4")
    hh, ww = h // patch, w // patch
    blocks = arr.reshape(length, hh, patch, ww, patch, 3)
    color_means = blocks.mean(axis=(2, 4))  # (L, h, w, 3)
    planes = [color_means[..., c] for c in range(min(channels, 3))]
    if channels == 4:
        planes.append(color_means.mean(axis=-1))
    values = np.stack(planes, axis=1)  # (L, C, h, w)
    return LatentVideo(values=values, patch=patch)


def downsample_mask(mask: np.ndarray, patch: int = DEFAULT_PATCH) -> np.ndarray:
    """Min-pool a pixel mask to cells: 1 only when the whole cell is covered."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise InvalidInput("mask must be (H, W)")
    h, w = mask.shape
    _check_patch(h, w, patch)
    cells = mask.reshape(h // patch, patch, w // patch, patch).all(axis=(1, 3))
    return cells.astype(np.float64)


def video_latent_mask(frames: Sequence[RenderedFrame], patch: int = DEFAULT_PATCH) -> LatentMask:
    """Stack per-frame min-pooled masks into an (L, 1, h, w) latent mask."""
    frames = list(frames)
    if len(frames) == 0:
        raise InvalidInput("empty video")
    cells = np.stack([downsample_mask(f.mask, patch) for f in frames], axis=0)
    return LatentMask(values=cells[:, None], patch=patch)


def masked_latent(latent: LatentVideo, mask: LatentMask) -> LatentVideo:
    """Zero every latent cell whose mask is 0."""
    lv, mv = latent.values, mask.values
    if latent.patch != mask.patch:
        raise InvalidInput("latent and mask patch factors differ")
    if lv.shape[0] != mv.shape[0] or lv.shape[2:] != mv.shape[2:]:
        raise InvalidInput(f"latent {lv.shape} and mask {mv.shape} grids differ")
    return LatentVideo(values=lv * mv, patch=latent.patch)


def make_noisy_latent(z0: LatentVideo, sched: NoiseSchedulePoint) -> LatentVideo:
    """alpha * z0 + sigma * eps with seeded standard-normal eps."""
    eps = np.random.default_rng(sched.seed).standard_normal(z0.values.shape)
    return LatentVideo(values=sched.alpha * z0.values + sched.sigma * eps, patch=z0.patch)


def in_layer(masked: LatentVideo, noisy: LatentVideo, weights: InLayerWeights) -> FusedFeatures:
    """Per-cell affine map of concat(masked, noisy) -> F feature channels."""
    if masked.values.shape != noisy.values.shape:
        raise InvalidInput("masked and noisy latents must share one shape")
    c = masked.values.shape[1]
    if weights.channels != c:
        raise InvalidInput(
            f"weights expect {weights.channels} channels, latents have {c}"
        )
    cat = np.concatenate([masked.values, noisy.values], axis=1)  # (L, 2C, h, w)
    out = np.einsum("fc,lcyx->lfyx", weights.weight, cat)
    out += weights.bias[None, :, None, None]
    return FusedFeatures(values=out)


# ---------------------------------------------------------------------------
# Fusion strategies


def fuse_max(features: Sequence[FusedFeatures]) -> FusedFeatures:
    """Elementwise max across views: permutation invariant by construction."""
    features = list(features)
    if len(features) == 0:
        raise InvalidInput("fuse_max needs at least one view")
    shape = features[0].values.shape
    for f in features:
        if f.values.shape != shape:
            raise InvalidInput("all views must share one feature shape")
    return FusedFeatures(values=np.maximum.reduce([f.values for f in features]))


def fuse_concat(latents: Sequence[LatentVideo], max_views: int = 4) -> LatentVideo:
    """Concatenate view latents along channels, zero-padding to max_views."""
    latents = list(latents)
    if not 1 <= len(latents) <= max_views:
        raise InvalidInput(f"need 1..{max_views} views, got {len(latents)}")
    shape = latents[0].values.shape
    patch = latents[0].patch
    for z in latents:
        if z.values.shape != shape or z.patch != patch:
            raise InvalidInput("all views must share one latent shape")
    length, c, h, w = shape
    out = np.zeros((length, max_views * c, h, w))
    for i, z in enumerate(latents):
        out[:, i * c : (i + 1) * c] = z.values
    return LatentVideo(values=out, patch=patch)


def fuse_explicit(clouds: Sequence[PointCloud]) -> PointCloud:
    """Merge point clouds by concatenation, preserving view order."""
    clouds = list(clouds)
    if len(clouds) == 0:
        raise InvalidInput("fuse_explicit needs at least one cloud")
    return PointCloud(
        positions=np.concatenate([c.positions for c in clouds], axis=0),
        colors=np.concatenate([c.colors for c in clouds], axis=0),
        source_pixel=np.concatenate([c.source_pixel for c in clouds], axis=0),
    )


# ---------------------------------------------------------------------------
# Generation


class GeneratorInterface(Protocol):
    """Consumes per-view guidance videos, returns one RGB video (L frames)."""

    def generate(self, guidance: Sequence[GuidanceVideo]) -> list[RenderedFrame]:
        ...


def _check_guidance(guidance: Sequence[GuidanceVideo]) -> tuple[int, int, int]:
    guidance = list(guidance)
    if len(guidance) == 0:
        raise InvalidInput("need at least one guidance video")
    length = len(guidance[0].frames)
    h, w = guidance[0].frames[0].mask.shape
    for g in guidance:
        if len(g.frames) != length:
            raise InvalidInput("guidance videos must share one length")
        for f in g.frames:
            if f.mask.shape != (h, w):
                raise InvalidInput("guidance videos must share one image size")
    return length, h, w


class PixelStubGenerator:
    """Per pixel, copy the nearest-depth covered view; fill the rest with the
    frame's mean covered color (0.5 gray when nothing is covered).

    With a single fully covered view the output equals the guidance exactly.
    """

    def generate(self, guidance: Sequence[GuidanceVideo]) -> list[RenderedFrame]:
        length, h, w = _check_guidance(guidance)
        out = []
        for t in range(length):
            frames = [g.frames[t] for g in guidance]
            masks = np.stack([f.mask for f in frames], axis=0)  # (V, H, W)
            depths = np.stack([f.depth for f in frames], axis=0)
            images = np.stack([f.image for f in frames], axis=0)
            ranked = np.where(masks, depths, np.inf)
            choice = np.argmin(ranked, axis=0)  # lowest view index wins ties
            covered = masks.any(axis=0)
            picked = np.take_along_axis(
                images, choice[None, :, :, None], axis=0
            )[0]
            picked_depth = np.take_along_axis(ranked, choice[None], axis=0)[0]
            if covered.any():
                covered_colors = images[masks]  # (K, 3) over every covered view pixel
                fill = covered_colors.astype(np.float64).mean(axis=0)
            else:
                fill = np.full(3, 0.5)
            image = np.where(
                covered[:, :, None], picked, fill.astype(np.float32)
            ).astype(np.float32)
            depth = np.where(covered, picked_depth, 0.0)
            out.append(RenderedFrame(image=image, mask=covered, depth=depth))
        return out


class LatentReconcileGenerator:
    """Cell-level reconciliation through the toy latent path.

    Each view is encoded to patch-mean colors with min-pooled cell validity;
    per cell the valid view with the nearest mean depth wins (lowest view
    index on ties) and its patch-mean color is upsampled back to pixels.
    Cells no view fully covers count as uncovered: they get the frame's mean
    covered color and a false mask.  This keeps each cell's content single-
    view consistent, which is the property the max-pool fusion path is
    designed to preserve and explicit cloud merging destroys.
    """

    def __init__(self, patch: int = DEFAULT_PATCH):
        if patch < 1:
            raise InvalidInput("patch factor must be >= 1")
        self.patch = patch

    def generate(self, guidance: Sequence[GuidanceVideo]) -> list[RenderedFrame]:
        length, h, w = _check_guidance(guidance)
        p = self.patch
        _check_patch(h, w, p)
        hh, ww = h // p, w // p
        out = []
        for t in range(length):
            frames = [g.frames[t] for g in guidance]
            colors = []
            valids = []
            dmeans = []
            for f in frames:
                blocks = f.image.astype(np.float64).reshape(hh, p, ww, p, 3)
                colors.append(blocks.mean(axis=(1, 3)))
                valids.append(
                    f.mask.reshape(hh, p, ww, p).all(axis=(1, 3))
                )
                dsum = (f.depth * f.mask).reshape(hh, p, ww, p).sum(axis=(1, 3))
                dcnt = f.mask.reshape(hh, p, ww, p).sum(axis=(1, 3))
                with np.errstate(invalid="ignore"):
                    dmeans.append(np.where(dcnt > 0, dsum / np.maximum(dcnt, 1), np.inf))
            colors = np.stack(colors, axis=0)  # (V, h, w, 3)
            valids = np.stack(valids, axis=0)  # (V, h, w)
            dmeans = np.stack(dmeans, axis=0)
            ranked = np.where(valids, dmeans, np.inf)
            choice = np.argmin(ranked, axis=0)
            covered = valids.any(axis=0)
            cell_color = np.take_along_axis(colors, choice[None, :, :, None], axis=0)[0]
            cell_depth = np.take_along_axis(ranked, choice[None], axis=0)[0]
            if covered.any():
                fill = cell_color[covered].mean(axis=0)
            else:
                fill = np.full(3, 0.5)
            cell_color = np.where(covered[:, :, None], cell_color, fill)
            image = cell_color.repeat(p, axis=0).repeat(p, axis=1).astype(np.float32)
            mask = covered.repeat(p, axis=0).repeat(p, axis=1)
            depth = np.where(covered, cell_depth, 0.0).repeat(p, axis=0).repeat(p, axis=1)
            out.append(RenderedFrame(image=image, mask=mask, depth=depth))
        return out


def generate(
    guidance: Sequence[GuidanceVideo], generator: GeneratorInterface | None = None
) -> list[RenderedFrame]:
    """Run a generator over guidance videos (default: PixelStubGenerator)."""
    if generator is None:
        generator = PixelStubGenerator()
    _check_guidance(guidance)
    return generator.generate(guidance)
