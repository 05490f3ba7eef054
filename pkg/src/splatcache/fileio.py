"""On-disk formats: PLY point clouds, PFM depth, PNG images/masks, and the
flat binary container used for latents and fusion weights.

Format notes
------------
- PLY: binary little-endian; per vertex ``x y z`` (float32), ``red green
  blue`` (uint8), ``u v`` (float32, source-pixel provenance).
- PFM: grayscale ``Pf``, scale -1.0 (little-endian), rows stored bottom-up
  as is conventional for the format.  Invalid depths are written as 0.
- Masks: 1-bit PNG, 255 = covered.
- Container: magic ``G3CL`` then four uint32 little-endian dims
  ``(L, C, h, w)`` then ``L*C*h*w`` float32 values, row-major.
"""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image

from .errors import InvalidInput

CONTAINER_MAGIC = b"G3CL"


# ---------------------------------------------------------------------------
# PNG


def save_image_png(path, image: np.ndarray) -> None:
    """Save an (H, W, 3) float image in [0, 1] as 8-bit RGB PNG."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise InvalidInput("expected an (H, W, 3) image")
    u8 = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(u8, mode="RGB").save(path, format="PNG")


def load_image_png(path) -> np.ndarray:
    """Load a PNG as an (H, W, 3) float32 image in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32)
    return arr / np.float32(255.0)


def save_mask_png(path, mask: np.ndarray) -> None:
    mask = np.asarray(mask, dtype=bool)
    Image.fromarray(mask).save(path, format="PNG", bits=1)


def load_mask_png(path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return arr > 127


# ---------------------------------------------------------------------------
# PFM depth maps


def save_pfm(path, values: np.ndarray, valid: np.ndarray | None = None) -> None:
    """Write a grayscale PFM.  Pixels where ``valid`` is false are written 0."""
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 2:
        raise InvalidInput("PFM writer expects a 2-D array")
    if valid is not None:
        values = np.where(np.asarray(valid, dtype=bool), values, np.float32(0.0))
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(values[::-1].astype("<f4").tobytes())


def load_pfm(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a grayscale PFM; returns (values float64, valid bool).

    A pixel is valid when its stored value is finite and > 0.
    """
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header != b"Pf":
            raise InvalidInput(f"not a grayscale PFM (header {header!r})")
        dims = fh.readline().split()
        if len(dims) != 2:
            raise InvalidInput("malformed PFM dimension line")
        w, h = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(w * h * 4), dtype=dtype)
        if data.size != w * h:
            raise InvalidInput("PFM payload truncated")
    values = data.reshape(h, w)[::-1].astype(np.float64)
    valid = np.isfinite(values) & (values > 0)
    return values, valid


# ---------------------------------------------------------------------------
# PLY point clouds

_PLY_HEADER = """ply
format binary_little_endian 1.0
element vertex {count}
property float x
property float y
property float z
property uchar red
property uchar green
property uchar blue
property float u
property float v
end_header
"""

_PLY_VERTEX = np.dtype(
    [
        ("x", "<f4"),
        ("y", "<f4"),
        ("z", "<f4"),
        ("red", "u1"),
        ("green", "u1"),
        ("blue", "u1"),
        ("u", "<f4"),
        ("v", "<f4"),
    ]
)


def save_ply(path, positions: np.ndarray, colors: np.ndarray, source_pixel: np.ndarray) -> None:
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    colors = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
    source_pixel = np.asarray(source_pixel, dtype=np.float64).reshape(-1, 2)
    n = positions.shape[0]
    if colors.shape[0] != n or source_pixel.shape[0] != n:
        raise InvalidInput("positions, colors and source_pixel must have equal length")
    rec = np.empty(n, dtype=_PLY_VERTEX)
    rec["x"], rec["y"], rec["z"] = positions.T.astype(np.float32)
    u8 = np.clip(np.rint(colors * 255.0), 0, 255).astype(np.uint8)
    rec["red"], rec["green"], rec["blue"] = u8.T
    rec["u"], rec["v"] = source_pixel.T.astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(_PLY_HEADER.format(count=n).encode("ascii"))
        fh.write(rec.tobytes())


def load_ply(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a PLY written by :func:`save_ply`.

    Returns (positions float64 (N,3), colors float32 (N,3) in [0,1],
    source_pixel float64 (N,2)).
    """
    with open(path, "rb") as fh:
        line = fh.readline()
        if line.strip() != b"ply":
            raise InvalidInput("not a PLY file")
        count = None
        fmt_ok = False
        while True:
            line = fh.readline()
            if not line:
                raise InvalidInput("PLY header truncated")
            token = line.strip()
            if token == b"format binary_little_endian 1.0":
                fmt_ok = True
            elif token.startswith(b"element vertex"):
                count = int(token.split()[-1])
            elif token == b"end_header":
                break
        if not fmt_ok or count is None:
            raise InvalidInput("unsupported PLY header")
        rec = np.frombuffer(fh.read(count * _PLY_VERTEX.itemsize), dtype=_PLY_VERTEX)
        if rec.size != count:
            raise InvalidInput("PLY payload truncated")
    positions = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float64)
    colors = np.stack([rec["red"], rec["green"], rec["blue"]], axis=1).astype(np.float32)
    colors /= np.float32(255.0)
    source_pixel = np.stack([rec["u"], rec["v"]], axis=1).astype(np.float64)
    return positions, colors, source_pixel


# ---------------------------------------------------------------------------
# Flat float container (latents, fusion weights)


def save_container(path, values: np.ndarray) -> None:
    """Write a 4-D float array as the flat binary container."""
    values = np.asarray(values)
    if values.ndim != 4:
        raise InvalidInput("container payload must be 4-D")
    with open(path, "wb") as fh:
        fh.write(CONTAINER_MAGIC)
        fh.write(struct.pack("<4I", *values.shape))
        fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def load_container(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CONTAINER_MAGIC:
            raise InvalidInput(f"bad container magic {magic!r}")
        dims = struct.unpack("<4I", fh.read(16))
        n = int(np.prod(dims))
        data = np.frombuffer(fh.read(n * 4), dtype="<f4")
        if data.size != n:
            raise InvalidInput("container payload truncated")
    return data.reshape(dims).astype(np.float64)
