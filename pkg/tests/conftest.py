"""Shared fixtures and independent reference implementations (oracles)."""

import numpy as np
import pytest

import splatcache as sc
from splatcache.splat import Z_EPSILON, Z_NEAR


def make_camera(width=96, height=72, fx=110.0, fy=110.0, pose=None):
    if pose is None:
        pose = sc.Pose(np.eye(3), np.zeros(3))
    intr = sc.Intrinsics(
        fx=fx, fy=fy, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0, width=width, height=height
    )
    return sc.Camera(intr, pose)


def look_at(center, target, up=(0.0, 1.0, 0.0)):
    """Camera-to-world pose whose +z axis points from center to target."""
    center = np.asarray(center, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - center
    forward = forward / np.linalg.norm(forward)
    right = np.cross(np.asarray(up, dtype=np.float64), forward)
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward], axis=1)
    return sc.Pose(rot, center)


def orbit_cameras(n, radius, target=(0.0, 0.0, 3.0), width=96, height=72, fx=110.0,
                  arc=2.0 * np.pi, start=0.0):
    """Cameras on a horizontal circle around ``target``, all looking at it."""
    target = np.asarray(target, dtype=np.float64)
    cams = []
    for i in range(n):
        angle = start + arc * i / n
        center = target + radius * np.array([np.sin(angle), 0.0, -np.cos(angle)])
        cams.append(
            sc.Camera(
                sc.Intrinsics(fx, fx, (width - 1) / 2.0, (height - 1) / 2.0, width, height),
                look_at(center, target),
            )
        )
    return cams


def brute_force_render(points, camera, splat_radius=0.0):
    """O(N * pixels) reference rasterizer.

    Independent of the kernel path: per pixel it scans every point, takes
    the minimum covering depth, and picks the lowest index within Z_EPSILON
    of it.  Used to verify the scatter-based renderer exactly.
    """
    h, w = camera.height, camera.width
    pixels, z = sc.project_points(points.positions, camera)
    keep = z > Z_NEAR
    u, v = pixels[keep, 0], pixels[keep, 1]
    ix = np.floor(u + 0.5)
    iy = np.floor(v + 0.5)
    d = z[keep]
    colors = points.colors[keep]
    r2 = float(splat_radius) ** 2
    image = np.zeros((h, w, 3), dtype=np.float32)
    mask = np.zeros((h, w), dtype=bool)
    depth = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        dy2 = (iy - y) ** 2
        for x in range(w):
            cover = (ix - x) ** 2 + dy2 <= r2
            if not cover.any():
                continue
            zmin = d[cover].min()
            qualifying = cover & (d <= zmin + Z_EPSILON)
            winner = int(np.nonzero(qualifying)[0][0])
            mask[y, x] = True
            image[y, x] = colors[winner]
            depth[y, x] = d[winner]
    return sc.RenderedFrame(image=image, mask=mask, depth=depth)


@pytest.fixture
def basic_camera():
    return make_camera()


@pytest.fixture
def basic_scene():
    return sc.make_scene(sc.SceneSpec(seed=11, primitive_count=4))
