"""Pinhole cameras, rigid poses, trajectories, and per-pixel ray embeddings.

Conventions
-----------
- World frame: right-handed.  Camera frame: +x right, +y down, +z forward
  (the optical axis).  A camera with identity pose looks down world +z.
- ``Pose`` stores the camera-to-world transform: ``x_world = R @ x_cam + t``.
  The translation therefore *is* the camera center in world coordinates.
- Pixel coordinates ``(u, v)`` refer to the **center** of texel ``(u, v)``.
  The principal point uses the same convention, so projecting the point
  unprojected at a texel center lands back exactly on that center.
- Depth is the z-coordinate of a point in the camera frame (not ray length).

JSON schema (shared by file I/O and the streaming server)::

    {"width": int, "height": int,
     "frames": [{"fx": f, "fy": f, "cx": f, "cy": f,
                 "rotation": [9 floats, row-major],
                 "translation": [3 floats]}]}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInput

ROTATION_TOL = 1e-9
# Below this quaternion angle we fall back from slerp to normalized lerp.
_SLERP_DOT_THRESHOLD = 0.9995


def _readonly(values, dtype, shape) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if arr.shape != shape:
        raise InvalidInput(f"expected shape {shape}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


def _check_rotation(rot: np.ndarray) -> None:
    err = np.abs(rot.T @ rot - np.eye(3)).max()
    if err > ROTATION_TOL:
        raise InvalidInput(f"rotation is not orthonormal (max |R^T R - I| = {err:g})")
    det = np.linalg.det(rot)
    if abs(det - 1.0) > ROTATION_TOL:
        raise InvalidInput(f"rotation determinant {det:g} != +1")


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics plus the image size they are valid for."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidInput("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise InvalidInput("image size must be at least 1x1")

    def matrix(self) -> np.ndarray:
        """3x3 calibration matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class Pose:
    """Rigid camera-to-world transform.

    ``rotation``: 3x3, maps camera-frame vectors into the world frame.
    ``translation``: camera center in world coordinates, meters.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _readonly(self.rotation, np.float64, (3, 3)))
        object.__setattr__(self, "translation", _readonly(self.translation, np.float64, (3,)))
        _check_rotation(self.rotation)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates (alias of ``translation``)."""
        return self.translation

    def world_to_camera(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (R_wc, t_wc) with ``x_cam = R_wc @ x_world + t_wc``."""
        r_wc = self.rotation.T
        return r_wc, -r_wc @ self.translation


@dataclass(frozen=True)
class Camera:
    intrinsics: Intrinsics
    pose: Pose

    @property
    def width(self) -> int:
        return self.intrinsics.width

    @property
    def height(self) -> int:
        return self.intrinsics.height


class Trajectory:
    """An ordered camera path; every frame shares one image size."""

    def __init__(self, frames: Sequence[Camera]):
        frames = tuple(frames)
        if len(frames) == 0:
            raise InvalidInput("a trajectory needs at least one frame")
        w, h = frames[0].width, frames[0].height
        for i, cam in enumerate(frames):
            if cam.width != w or cam.height != h:
                raise InvalidInput(
                    f"frame {i} has size {cam.width}x{cam.height}, expected {w}x{h}"
                )
        self.frames = frames
        self.width = w
        self.height = h

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return Trajectory(self.frames[idx])
        return self.frames[idx]

    def __iter__(self):
        return iter(self.frames)

    def to_json(self) -> str:
        frames = []
        for cam in self.frames:
            k = cam.intrinsics
            frames.append(
                {
                    "fx": k.fx,
                    "fy": k.fy,
                    "cx": k.cx,
                    "cy": k.cy,
                    "rotation": [float(x) for x in cam.pose.rotation.reshape(-1)],
                    "translation": [float(x) for x in cam.pose.translation],
                }
            )
        return json.dumps(
            {"width": self.width, "height": self.height, "frames": frames}, indent=2
        )

    @staticmethod
    def from_json(text: str) -> "Trajectory":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"trajectory is not valid JSON: {exc}") from exc
        try:
            width = int(doc["width"])
            height = int(doc["height"])
            raw_frames = doc["frames"]
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"trajectory JSON missing field: {exc}") from exc
        if not raw_frames:
            raise InvalidInput("trajectory JSON has no frames")
        frames = []
        for i, fr in enumerate(raw_frames):
            try:
                intr = Intrinsics(
                    fx=float(fr["fx"]),
                    fy=float(fr["fy"]),
                    cx=float(fr["cx"]),
                    cy=float(fr["cy"]),
                    width=width,
                    height=height,
                )
                rot = np.array(fr["rotation"], dtype=np.float64).reshape(3, 3)
                tr = np.array(fr["translation"], dtype=np.float64)
            except (KeyError, TypeError, ValueError) as exc:
                raise InvalidInput(f"frame {i} malformed: {exc}") from exc
            frames.append(Camera(intr, Pose(rot, tr)))
        return Trajectory(frames)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @staticmethod
    def load(path) -> "Trajectory":
        with open(path) as fh:
            return Trajectory.from_json(fh.read())


@dataclass(frozen=True)
class PluckerMap:
    """Per-pixel ray embedding: direction d (unit) and moment m = o x d."""

    values: np.ndarray  # (6, H, W): channels 0..2 = d, 3..5 = m

    @property
    def direction(self) -> np.ndarray:
        return self.values[:3]

    @property
    def moment(self) -> np.ndarray:
        return self.values[3:]


# ---------------------------------------------------------------------------
# Projection


def project_points(points: np.ndarray, camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Project world points into the image plane.

    Returns (pixels (N, 2) float, depths (N,) float).  Depth is the camera-
    frame z coordinate; points behind the camera get depth <= 0 and their
    pixel coordinates are not meaningful.
    """
    points = np.asarray(points, dtype=np.float64)
    flat = points.reshape(-1, 3)
    cam_xyz = (flat - camera.pose.translation) @ camera.pose.rotation
    z = cam_xyz[:, 2]
    k = camera.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u = k.fx * cam_xyz[:, 0] / z + k.cx
        v = k.fy * cam_xyz[:, 1] / z + k.cy
    return np.stack([u, v], axis=1), z


def project(point, camera: Camera) -> tuple[np.ndarray, float]:
    """Scalar wrapper: world point -> (pixel (2,), depth)."""
    pixels, depths = project_points(np.asarray(point, dtype=np.float64).reshape(1, 3), camera)
    return pixels[0], float(depths[0])


def unproject_pixels(
    pixels: np.ndarray, depths: np.ndarray, camera: Camera
) -> np.ndarray:
    """Lift pixels (N, 2) at camera-frame depths (N,) to world points (N, 3)."""
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    depths = np.asarray(depths, dtype=np.float64).reshape(-1)
    if np.any(depths <= 0):
        raise InvalidInput("unproject requires positive depth")
    k = camera.intrinsics
    x = (pixels[:, 0] - k.cx) / k.fx * depths
    y = (pixels[:, 1] - k.cy) / k.fy * depths
    cam_xyz = np.stack([x, y, depths], axis=1)
    return cam_xyz @ camera.pose.rotation.T + camera.pose.translation


def unproject(pixel, depth: float, camera: Camera) -> np.ndarray:
    """Scalar wrapper: pixel (2,) at depth -> world point (3,)."""
    return unproject_pixels(np.asarray(pixel).reshape(1, 2), np.array([depth]), camera)[0]


def plucker_map(camera: Camera) -> PluckerMap:
    """Per-pixel ray directions and moments for a camera, shape (6, H, W)."""
    k = camera.intrinsics
    u = np.arange(k.width, dtype=np.float64)
    v = np.arange(k.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    dirs_cam = np.stack(
        [(uu - k.cx) / k.fx, (vv - k.cy) / k.fy, np.ones_like(uu)], axis=-1
    )
    dirs_world = dirs_cam @ camera.pose.rotation.T
    dirs_world /= np.linalg.norm(dirs_world, axis=-1, keepdims=True)
    origin = camera.pose.translation
    moments = np.cross(np.broadcast_to(origin, dirs_world.shape), dirs_world)
    values = np.concatenate(
        [np.moveaxis(dirs_world, -1, 0), np.moveaxis(moments, -1, 0)], axis=0
    )
    return PluckerMap(values)


# ---------------------------------------------------------------------------
# Quaternions (w, x, y, z)


def _rot_to_quat(rot: np.ndarray) -> np.ndarray:
    m = rot
    trace = m[0, 0] + m[1, 1] + m[2, 2]
    if trace > 0:
        s = math.sqrt(trace + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    q /= np.linalg.norm(q)
    # Canonical sign: w >= 0, so both interpolation endpoints sit on the same
    # hemisphere and slerp takes the short way.
    if q[0] < 0:
        q = -q
    return q


def _quat_to_rot(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def _slerp(q0: np.ndarray, q1: np.ndarray, u: float) -> np.ndarray:
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    if dot > _SLERP_DOT_THRESHOLD:
        q = q0 + u * (q1 - q0)
        return q / np.linalg.norm(q)
    theta = math.acos(min(dot, 1.0))
    s0 = math.sin((1.0 - u) * theta) / math.sin(theta)
    s1 = math.sin(u * theta) / math.sin(theta)
    q = s0 * q0 + s1 * q1
    return q / np.linalg.norm(q)


# ---------------------------------------------------------------------------
# Trajectory synthesis


def interpolate_trajectory(keyframes: Sequence[Camera], n: int) -> Trajectory:
    """Resample a keyframe path to ``n`` frames.

    Rotations interpolate by slerp, centers and intrinsics linearly.
    Keyframes are placed at equally spaced parameters in [0, 1]; any sample
    that lands exactly on a keyframe parameter returns that keyframe object
    unchanged (bit-for-bit, in particular both endpoints).
    """
    keyframes = list(keyframes)
    if len(keyframes) < 2:
        raise InvalidInput("need at least two keyframes")
    if n < len(keyframes):
        raise InvalidInput("n must be at least the number of keyframes")
    w, h = keyframes[0].width, keyframes[0].height
    for cam in keyframes:
        if cam.width != w or cam.height != h:
            raise InvalidInput("keyframes must share one image size")

    quats = [_rot_to_quat(cam.pose.rotation) for cam in keyframes]
    nseg = len(keyframes) - 1
    frames = []
    for j in range(n):
        t = j / (n - 1)
        x = t * nseg
        k = min(int(math.floor(x)), nseg - 1)
        u = x - k
        if u == 0.0:
            frames.append(keyframes[k])
            continue
        if u == 1.0:
            frames.append(keyframes[k + 1])
            continue
        a, b = keyframes[k], keyframes[k + 1]
        rot = _quat_to_rot(_slerp(quats[k], quats[k + 1], u))
        center = (1.0 - u) * a.pose.translation + u * b.pose.translation
        ia, ib = a.intrinsics, b.intrinsics
        intr = Intrinsics(
            fx=(1.0 - u) * ia.fx + u * ib.fx,
            fy=(1.0 - u) * ia.fy + u * ib.fy,
            cx=(1.0 - u) * ia.cx + u * ib.cx,
            cy=(1.0 - u) * ia.cy + u * ib.cy,
            width=w,
            height=h,
        )
        frames.append(Camera(intr, Pose(rot, center)))
    return Trajectory(frames)


def offset_trajectory(trajectory: Trajectory, lateral: float) -> Trajectory:
    """Shift every camera center along its own right axis by ``lateral`` meters.

    Rotations and intrinsics are unchanged, so offset(T, d) then offset(-d)
    returns the original path exactly.
    """
    frames = []
    for cam in trajectory:
        right = cam.pose.rotation[:, 0]
        frames.append(
            Camera(cam.intrinsics, Pose(cam.pose.rotation, cam.pose.translation + lateral * right))
        )
    return Trajectory(frames)
