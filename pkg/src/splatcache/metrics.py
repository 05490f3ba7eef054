"""Image and geometric-consistency metrics.

- PSNR against peak 1.0, capped at 99 dB (the value reported for identical
  inputs), with an optional pixel mask.
- SSIM with the standard 11x11 Gaussian window (sigma 1.5), k1=0.01,
  k2=0.03, population statistics, averaged over pixels and channels.
- Epipolar consistency: the fraction of correspondences whose symmetric
  epipolar distance under the two cameras' fundamental matrix stays within
  a pixel threshold (default 2 px).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate

from .errors import DegenerateGeometry, InvalidInput
from .geometry import Camera

PSNR_CAP = 99.0
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def psnr(
    a: np.ndarray,
    b: np.ndarray,
    mask: np.ndarray | None = None,
    peak: float = 1.0,
    cap: float = PSNR_CAP,
) -> float:
    """Peak signal-to-noise ratio in dB over (optionally masked) pixels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInput(f"shape mismatch {a.shape} vs {b.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != a.shape[: mask.ndim]:
            raise InvalidInput("mask must match the leading image dimensions")
        a = a[mask]
        b = b[mask]
    if a.size == 0:
        raise InvalidInput("PSNR over an empty pixel set")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return cap
    return min(10.0 * np.log10(peak * peak / mse), cap)


def _gaussian_kernel() -> np.ndarray:
    half = _SSIM_WINDOW // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * _SSIM_SIGMA * _SSIM_SIGMA))
    g /= g.sum()
    return np.outer(g, g)


def _ssim_plane(a: np.ndarray, b: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    c1 = _SSIM_K1 * _SSIM_K1
    c2 = _SSIM_K2 * _SSIM_K2
    mu_a = correlate(a, kernel, mode="reflect")
    mu_b = correlate(b, kernel, mode="reflect")
    mu_aa = correlate(a * a, kernel, mode="reflect")
    mu_bb = correlate(b * b, kernel, mode="reflect")
    mu_ab = correlate(a * b, kernel, mode="reflect")
    var_a = mu_aa - mu_a * mu_a
    var_b = mu_bb - mu_b * mu_b
    cov = mu_ab - mu_a * mu_b
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean SSIM over pixels (and channels for color input); peak is 1.0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInput(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    if a.ndim != 3:
        raise InvalidInput("ssim expects (H, W) or (H, W, C) images")
    if min(a.shape[0], a.shape[1]) < _SSIM_WINDOW:
        raise InvalidInput(f"images must be at least {_SSIM_WINDOW} px per side")
    kernel = _gaussian_kernel()
    planes = [
        _ssim_plane(a[:, :, c], b[:, :, c], kernel) for c in range(a.shape[2])
    ]
    return float(np.mean(planes))


# ---------------------------------------------------------------------------
# Epipolar consistency


def fundamental_matrix(cam_a: Camera, cam_b: Camera) -> np.ndarray:
    """F such that x_b^T F x_a = 0 for pixel correspondences (homogeneous)."""
    r_a, t_a = cam_a.pose.world_to_camera()
    r_b, t_b = cam_b.pose.world_to_camera()
    r_rel = r_b @ r_a.T
    t_rel = t_b - r_rel @ t_a
    if np.linalg.norm(t_rel) < 1e-12:
        raise DegenerateGeometry(
            "cameras share a center; the epipolar relation is undefined"
        )
    tx = np.array(
        [
            [0.0, -t_rel[2], t_rel[1]],
            [t_rel[2], 0.0, -t_rel[0]],
            [-t_rel[1], t_rel[0], 0.0],
        ]
    )
    essential = tx @ r_rel
    k_a_inv = np.linalg.inv(cam_a.intrinsics.matrix())
    k_b_inv = np.linalg.inv(cam_b.intrinsics.matrix())
    return k_b_inv.T @ essential @ k_a_inv


def symmetric_epipolar_distance(
    pixels_a: np.ndarray, pixels_b: np.ndarray, f_matrix: np.ndarray
) -> np.ndarray:
    """Mean of the two point-to-epipolar-line pixel distances per pair."""
    pa = np.asarray(pixels_a, dtype=np.float64).reshape(-1, 2)
    pb = np.asarray(pixels_b, dtype=np.float64).reshape(-1, 2)
    if pa.shape != pb.shape:
        raise InvalidInput("correspondence arrays must match in length")
    ha = np.concatenate([pa, np.ones((pa.shape[0], 1))], axis=1)
    hb = np.concatenate([pb, np.ones((pb.shape[0], 1))], axis=1)
    lines_b = ha @ f_matrix.T  # epipolar lines of a-points in image b
    lines_a = hb @ f_matrix  # epipolar lines of b-points in image a
    num = np.abs(np.sum(hb * lines_b, axis=1))
    norm_b = np.hypot(lines_b[:, 0], lines_b[:, 1])
    norm_a = np.hypot(lines_a[:, 0], lines_a[:, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        d_b = np.where(norm_b > 0, num / norm_b, np.inf)
        d_a = np.where(norm_a > 0, num / norm_a, np.inf)
    return 0.5 * (d_a + d_b)


def epipolar_consistency(
    pixels_a: np.ndarray,
    pixels_b: np.ndarray,
    cam_a: Camera,
    cam_b: Camera,
    threshold: float = 2.0,
) -> float:
    """Fraction of correspondences within ``threshold`` px of epipolar."""
    if threshold <= 0:
        raise InvalidInput("threshold must be positive")
    pa = np.asarray(pixels_a, dtype=np.float64).reshape(-1, 2)
    if pa.shape[0] == 0:
        raise InvalidInput("no correspondences given")
    f_matrix = fundamental_matrix(cam_a, cam_b)
    dist = symmetric_epipolar_distance(pixels_a, pixels_b, f_matrix)
    return float(np.mean(dist <= threshold))


# ---------------------------------------------------------------------------
# Report


@dataclass(frozen=True)
class MetricReport:
    psnr_mean: float
    ssim_mean: float
    psnr_per_frame: tuple[float, ...]
    ssim_per_frame: tuple[float, ...]
    pixel_support: int
    epipolar_score: float | None = None

    def to_json(self) -> str:
        doc = {
            "psnr_mean": self.psnr_mean,
            "ssim_mean": self.ssim_mean,
            "psnr_per_frame": list(self.psnr_per_frame),
            "ssim_per_frame": list(self.ssim_per_frame),
            "pixel_support": self.pixel_support,
            "epipolar_score": self.epipolar_score,
        }
        return json.dumps(doc, indent=2)


def video_report(pred_frames, gt_frames, masks=None) -> MetricReport:
    """Frame-wise PSNR/SSIM summary of a predicted video against ground truth.

    ``masks`` (optional) restricts PSNR per frame; SSIM always runs on the
    full frame since its window statistics need dense neighborhoods.
    """
    pred_frames = list(pred_frames)
    gt_frames = list(gt_frames)
    if len(pred_frames) == 0 or len(pred_frames) != len(gt_frames):
        raise InvalidInput("prediction and ground truth must pair up")
    if masks is not None:
        masks = list(masks)
        if len(masks) != len(pred_frames):
            raise InvalidInput("one mask per frame required")
    psnrs = []
    ssims = []
    support = 0
    for i, (p, g) in enumerate(zip(pred_frames, gt_frames)):
        mask = None if masks is None else np.asarray(masks[i], dtype=bool)
        psnrs.append(psnr(p, g, mask=mask))
        ssims.append(ssim(p, g))
        support += int(mask.sum()) if mask is not None else int(np.prod(np.asarray(p).shape[:2]))
    return MetricReport(
        psnr_mean=float(np.mean(psnrs)),
        ssim_mean=float(np.mean(ssims)),
        psnr_per_frame=tuple(psnrs),
        ssim_per_frame=tuple(ssims),
        pixel_support=support,
    )
