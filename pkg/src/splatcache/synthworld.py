"""Deterministic synthetic scenes with analytic ray intersections.

Scenes are collections of textured primitives (rectangle, sphere, box) with
rigid poses.  Rendering casts one ray per texel center and intersects it in
closed form, so depth maps are exact to floating-point precision and can be
used as ground truth for the rasterizer and the alignment code.

Surface color is the albedo at the hit point (view-independent shading), so
the same surface point has the same color from every camera.

Depth convention matches the geometry module: the camera ray through pixel
(u, v) has camera-frame direction ((u-cx)/fx, (v-cy)/fy, 1); solving the
intersection along that *unnormalized* direction makes the ray parameter
equal to the camera-frame z of the hit, i.e. the stored depth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cache import DepthMap, PostedFrame
from .errors import InvalidInput
from .geometry import Camera, Pose

_T_MIN = 1e-9


@dataclass(frozen=True)
class Texture:
    """Procedural albedo.

    kind 'checker': cells of ``1/scale`` uv units alternating color_a/color_b.
    kind 'gradient': albedo blends a -> b along the uv direction ``direction``
    with slope ``scale`` per uv unit, clipped to [0, 1].
    """

    kind: str
    color_a: tuple[float, float, float]
    color_b: tuple[float, float, float]
    scale: float = 1.0
    direction: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("checker", "gradient"):
            raise InvalidInput(f"unknown texture kind {self.kind!r}")
        if self.scale <= 0:
            raise InvalidInput("texture scale must be positive")

    def albedo(self, uv: np.ndarray) -> np.ndarray:
        """uv (..., 2) -> color (..., 3) float64."""
        a = np.asarray(self.color_a, dtype=np.float64)
        b = np.asarray(self.color_b, dtype=np.float64)
        u, v = uv[..., 0], uv[..., 1]
        if self.kind == "checker":
            parity = (np.floor(u * self.scale) + np.floor(v * self.scale)) % 2.0
            w = parity[..., None]
        else:
            du, dv = self.direction
            norm = np.hypot(du, dv)
            if norm == 0:
                raise InvalidInput("gradient direction must be nonzero")
            w = np.clip(0.5 + (u * du + v * dv) / norm * self.scale, 0.0, 1.0)[..., None]
        return a + w * (b - a)


@dataclass(frozen=True)
class Primitive:
    """A textured rigid primitive.

    shape 'plane':  rectangle in the local z=0 plane; size = (sx, sy) extents.
    shape 'sphere': centered at the local origin; size = radius.
    shape 'box':    axis-aligned in the local frame; size = (sx, sy, sz).

    ``track`` optionally gives one pose per frame time for animated scenes;
    when present it overrides ``pose`` at positive times.
    """

    shape: str
    pose: Pose
    size: tuple
    texture: Texture
    track: tuple[Pose, ...] = field(default=())

    def __post_init__(self):
        if self.shape not in ("plane", "sphere", "box"):
            raise InvalidInput(f"unknown primitive shape {self.shape!r}")
        size = np.atleast_1d(np.asarray(self.size, dtype=np.float64))
        expected = {"plane": 2, "sphere": 1, "box": 3}[self.shape]
        if size.size != expected:
            raise InvalidInput(f"{self.shape} needs {expected} size value(s)")
        if np.any(size <= 0):
            raise InvalidInput("primitive sizes must be positive")
        object.__setattr__(self, "size", tuple(float(x) for x in size))

    def pose_at(self, time: int) -> Pose:
        if self.track:
            if not 0 <= time < len(self.track):
                raise InvalidInput(f"time {time} outside pose track of length {len(self.track)}")
            return self.track[time]
        return self.pose

    def intersect(
        self, origin: np.ndarray, dirs: np.ndarray, time: int = 0
    ) -> tuple[np.ndarray, np.ndarray]:
        """Ray-primitive intersection.

        origin (3,) and dirs (..., 3) are in world coordinates; returns
        (t (...,) with +inf for misses, uv (..., 2) texture coordinates).
        The ray parameter is preserved by the rigid transform into the local
        frame because directions are not renormalized.
        """
        pose = self.pose_at(time)
        rot, tr = pose.rotation, pose.translation
        o = (origin - tr) @ rot
        d = dirs @ rot
        if self.shape == "plane":
            return self._intersect_plane(o, d)
        if self.shape == "sphere":
            return self._intersect_sphere(o, d)
        return self._intersect_box(o, d)

    def _intersect_plane(self, o, d):
        sx, sy = self.size
        dz = d[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -o[2] / dz
        hit = o[:2] + t[..., None] * d[..., :2]
        ok = (
            np.isfinite(t)
            & (t > _T_MIN)
            & (np.abs(hit[..., 0]) <= sx / 2.0)
            & (np.abs(hit[..., 1]) <= sy / 2.0)
        )
        t = np.where(ok, t, np.inf)
        return t, hit

    def _intersect_sphere(self, o, d):
        (radius,) = self.size
        a = np.sum(d * d, axis=-1)
        b = 2.0 * (d @ o)
        c = float(o @ o) - radius * radius
        disc = b * b - 4.0 * a * c
        with np.errstate(invalid="ignore"):
            sq = np.sqrt(disc)
            t0 = (-b - sq) / (2.0 * a)
            t1 = (-b + sq) / (2.0 * a)
        t = np.where(t0 > _T_MIN, t0, t1)
        ok = (disc >= 0) & (t > _T_MIN)
        t = np.where(ok, t, np.inf)
        hit = o + t[..., None] * d
        with np.errstate(invalid="ignore"):
            theta = np.arctan2(hit[..., 1], hit[..., 0])
            phi = np.arccos(np.clip(hit[..., 2] / radius, -1.0, 1.0))
        uv = np.stack([theta * radius, phi * radius], axis=-1)
        uv = np.where(np.isfinite(uv), uv, 0.0)
        return t, uv

    def _intersect_box(self, o, d):
        half = np.asarray(self.size, dtype=np.float64) / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
        lo = (-half - o) * inv
        hi = (half - o) * inv
        # Rays parallel to a slab: inside -> (-inf, +inf), outside -> miss.
        parallel = d == 0.0
        tn_axis = np.minimum(lo, hi)
        tf_axis = np.maximum(lo, hi)
        if np.any(parallel):
            inside_slab = np.broadcast_to(np.abs(o) <= half, d.shape)
            tn_axis = np.where(parallel, np.where(inside_slab, -np.inf, np.inf), tn_axis)
            tf_axis = np.where(parallel, np.where(inside_slab, np.inf, -np.inf), tf_axis)
        tnear = np.max(tn_axis, axis=-1)
        tfar = np.min(tf_axis, axis=-1)
        ok = (tnear <= tfar) & (tnear > _T_MIN)
        t = np.where(ok, tnear, np.inf)
        with np.errstate(invalid="ignore"):
            hit = o + t[..., None] * d
        # Face = axis with the largest normalized coordinate at the hit.
        ratio = np.where(np.isfinite(hit), np.abs(hit) / half, 0.0)
        axis = np.argmax(ratio, axis=-1)
        u = np.choose(axis, [hit[..., 1], hit[..., 0], hit[..., 0]])
        v = np.choose(axis, [hit[..., 2], hit[..., 2], hit[..., 1]])
        uv = np.stack([u, v], axis=-1)
        uv = np.where(np.isfinite(uv), uv, 0.0)
        return t, uv


@dataclass(frozen=True)
class Scene:
    primitives: tuple[Primitive, ...]

    def __post_init__(self):
        if len(self.primitives) == 0:
            raise InvalidInput("a scene needs at least one primitive")


@dataclass(frozen=True)
class SceneSpec:
    """Seeded recipe for a random scene (same spec -> identical scene)."""

    seed: int
    primitive_count: int = 3
    extent: float = 2.0
    texture_frequency: float = 1.5

    def __post_init__(self):
        if self.primitive_count < 1:
            raise InvalidInput("primitive_count must be at least 1")
        if self.extent <= 0:
            raise InvalidInput("extent must be positive")
        if self.texture_frequency <= 0:
            raise InvalidInput("texture_frequency must be positive")


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def make_scene(spec: SceneSpec) -> Scene:
    """Expand a seeded spec into a scene.

    Layout: a large gradient backdrop rectangle behind a cluster of random
    primitives, all at positive z so a probe camera at the origin looking
    down +z sees every primitive.
    """
    rng = np.random.default_rng(spec.seed)
    ext = spec.extent
    prims = []

    backdrop_colors = rng.uniform(0.15, 0.85, size=(2, 3))
    gdir = rng.standard_normal(2)
    gdir /= np.hypot(*gdir)
    prims.append(
        Primitive(
            shape="plane",
            pose=Pose(np.eye(3), np.array([0.0, 0.0, 1.0 + 2.4 * ext])),
            size=(8.0 * ext, 6.0 * ext),
            texture=Texture(
                kind="gradient",
                color_a=tuple(backdrop_colors[0]),
                color_b=tuple(backdrop_colors[1]),
                scale=spec.texture_frequency * 0.1,
                direction=(float(gdir[0]), float(gdir[1])),
            ),
        )
    )

    shapes = ["sphere", "box", "plane"]
    for i in range(spec.primitive_count - 1):
        shape = shapes[int(rng.integers(len(shapes)))]
        center = np.array(
            [
                rng.uniform(-0.55, 0.55) * ext,
                rng.uniform(-0.45, 0.45) * ext,
                1.0 + rng.uniform(0.3, 1.4) * ext,
            ]
        )
        base = rng.uniform(0.22, 0.5) * ext
        if shape == "sphere":
            size: tuple = (0.5 * base,)
            rot = np.eye(3)
        elif shape == "box":
            size = tuple(base * rng.uniform(0.5, 1.0, size=3))
            rot = _random_rotation(rng)
        else:
            size = tuple(base * rng.uniform(0.8, 1.6, size=2))
            rot = _random_rotation(rng)
        colors = rng.uniform(0.08, 0.92, size=(2, 3))
        if i % 2 == 0:
            tex = Texture(
                kind="checker",
                color_a=tuple(colors[0]),
                color_b=tuple(colors[1]),
                scale=spec.texture_frequency,
            )
        else:
            tdir = rng.standard_normal(2)
            tdir /= np.hypot(*tdir)
            tex = Texture(
                kind="gradient",
                color_a=tuple(colors[0]),
                color_b=tuple(colors[1]),
                scale=spec.texture_frequency * 0.5,
                direction=(float(tdir[0]), float(tdir[1])),
            )
        prims.append(Primitive(shape=shape, pose=Pose(rot, center), size=size, texture=tex))

    return Scene(primitives=tuple(prims))


def raster_ground_truth(
    scene: Scene, camera: Camera, time: int = 0
) -> tuple[np.ndarray, DepthMap]:
    """Render (image float32 (H, W, 3), DepthMap) by analytic ray casting.

    Pixels that hit no primitive are black with invalid depth.
    """
    k = camera.intrinsics
    u = np.arange(k.width, dtype=np.float64)
    v = np.arange(k.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    dirs_cam = np.stack(
        [(uu - k.cx) / k.fx, (vv - k.cy) / k.fy, np.ones_like(uu)], axis=-1
    )
    dirs_world = dirs_cam @ camera.pose.rotation.T
    origin = camera.pose.translation

    best_t = np.full((k.height, k.width), np.inf)
    image = np.zeros((k.height, k.width, 3), dtype=np.float64)
    for prim in scene.primitives:
        t, uv = prim.intersect(origin, dirs_world, time=time)
        closer = t < best_t
        if not np.any(closer):
            continue
        color = prim.texture.albedo(uv)
        image = np.where(closer[..., None], color, image)
        best_t = np.where(closer, t, best_t)

    valid = np.isfinite(best_t)
    depth = DepthMap(values=np.where(valid, best_t, 0.0), valid=valid)
    return image.astype(np.float32), depth


def posed_frame(scene: Scene, camera: Camera, time: int = 0) -> PostedFrame:
    """Ground-truth RGB-D observation of the scene from one camera."""
    image, depth = raster_ground_truth(scene, camera, time=time)
    return PostedFrame(image=image, depth=depth, camera=camera)


# ---------------------------------------------------------------------------
# Serialization


def _pose_to_doc(pose: Pose) -> dict:
    return {
        "rotation": [float(x) for x in pose.rotation.reshape(-1)],
        "translation": [float(x) for x in pose.translation],
    }


def _pose_from_doc(doc: dict) -> Pose:
    return Pose(
        np.array(doc["rotation"], dtype=np.float64).reshape(3, 3),
        np.array(doc["translation"], dtype=np.float64),
    )


def scene_to_json(scene: Scene) -> str:
    prims = []
    for p in scene.primitives:
        tex = {
            "kind": p.texture.kind,
            "color_a": list(p.texture.color_a),
            "color_b": list(p.texture.color_b),
            "scale": p.texture.scale,
            "direction": list(p.texture.direction),
        }
        doc = {
            "shape": p.shape,
            "size": list(p.size),
            "texture": tex,
            **_pose_to_doc(p.pose),
        }
        if p.track:
            doc["track"] = [_pose_to_doc(q) for q in p.track]
        prims.append(doc)
    return json.dumps({"primitives": prims}, indent=2)


def scene_from_json(text: str) -> Scene:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"scene is not valid JSON: {exc}") from exc
    if "primitives" not in doc:
        raise InvalidInput("scene JSON missing 'primitives'")
    prims = []
    for i, pd in enumerate(doc["primitives"]):
        try:
            tex = pd["texture"]
            prims.append(
                Primitive(
                    shape=pd["shape"],
                    pose=_pose_from_doc(pd),
                    size=tuple(pd["size"]),
                    texture=Texture(
                        kind=tex["kind"],
                        color_a=tuple(tex["color_a"]),
                        color_b=tuple(tex["color_b"]),
                        scale=float(tex.get("scale", 1.0)),
                        direction=tuple(tex.get("direction", (1.0, 0.0))),
                    ),
                    track=tuple(_pose_from_doc(q) for q in pd.get("track", ())),
                )
            )
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"primitive {i} malformed: {exc}") from exc
    return Scene(primitives=tuple(prims))


def load_scene_or_spec(text: str) -> Scene:
    """Accept either a full scene document or a seeded spec document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"not valid JSON: {exc}") from exc
    if "primitives" in doc:
        return scene_from_json(text)
    try:
        spec = SceneSpec(
            seed=int(doc["seed"]),
            primitive_count=int(doc.get("primitive_count", 3)),
            extent=float(doc.get("extent", 2.0)),
            texture_frequency=float(doc.get("texture_frequency", 1.5)),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"scene spec malformed: {exc}") from exc
    return make_scene(spec)
