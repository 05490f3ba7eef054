"""Interactive pose-streaming server.

HTTP surface
------------
- ``POST /session``                  -> ``{"id": <hex>}``
- ``GET  /healthz``                  -> ``{"status": "ok"}``
- ``GET  /session/{id}/trajectory``  -> Trajectory JSON of accepted poses
- ``WS   /session/{id}/stream``      -> pose messages in, frames out

Stream protocol
---------------
Client sends JSON text messages::

    {"seq": int, "width": int, "height": int,
     "frame": {"fx", "fy", "cx", "cy", "rotation": [9], "translation": [3]}}

``frame`` uses exactly the trajectory-file frame schema.  Sequence numbers
must be strictly increasing per session; a stale or repeated number is
rejected with ``{"type": "error", "reason": "stale_sequence", "current": n}``
and not rendered.  Accepted poses are rendered from the cache (all views of
time step 0 merged) through the same rasterizer as offline rendering, then
returned as one binary message::

    u32le seq | u32le image_bytes | u32le mask_bytes | image PNG | mask PNG

The first websocket on a session is its writer; poses from any additional
(read-only) connection are rejected with reason ``read_only``.  Every
accepted pose is appended to the session's trajectory, so an interactive
flight can be re-rendered offline byte-for-byte from the trajectory
endpoint's output.
"""

from __future__ import annotations

import io
import struct
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import Response

from . import fileio
from .cache import Cache3D, PointCloud
from .errors import InvalidInput
from .fusion import fuse_explicit
from .geometry import Camera, Intrinsics, Pose, Trajectory
from .splat import render


@dataclass
class _Session:
    cloud: PointCloud
    splat_radius: float
    cameras: list[Camera] = field(default_factory=list)
    last_seq: int = 0
    writer_active: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)


def _camera_from_message(doc: dict) -> Camera:
    frame = doc["frame"]
    intr = Intrinsics(
        fx=float(frame["fx"]),
        fy=float(frame["fy"]),
        cx=float(frame["cx"]),
        cy=float(frame["cy"]),
        width=int(doc["width"]),
        height=int(doc["height"]),
    )
    pose = Pose(
        np.array(frame["rotation"], dtype=np.float64).reshape(3, 3),
        np.array(frame["translation"], dtype=np.float64),
    )
    return Camera(intr, pose)


def _png_bytes(save_fn, array) -> bytes:
    buf = io.BytesIO()
    save_fn(buf, array)
    return buf.getvalue()


def make_app(cache: Cache3D, splat_radius: float = 0) -> FastAPI:
    app = FastAPI(title="splatcache stream server")
    merged = fuse_explicit(list(cache.grid[0]))
    sessions: dict[str, _Session] = {}

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/session")
    def create_session():
        sid = uuid.uuid4().hex
        sessions[sid] = _Session(cloud=merged, splat_radius=splat_radius)
        return {"id": sid}

    @app.get("/session/{sid}/trajectory")
    def trajectory(sid: str):
        session = sessions.get(sid)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        with session.lock:
            if not session.cameras:
                raise HTTPException(status_code=409, detail="no poses recorded yet")
            text = Trajectory(session.cameras).to_json()
        return Response(content=text, media_type="application/json")

    @app.websocket("/session/{sid}/stream")
    async def stream(websocket: WebSocket, sid: str):
        session = sessions.get(sid)
        if session is None:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        with session.lock:
            is_writer = not session.writer_active
            session.writer_active = session.writer_active or is_writer
        try:
            while True:
                try:
                    doc = await websocket.receive_json()
                except (ValueError, KeyError):
                    await websocket.send_json(
                        {"type": "error", "reason": "bad_message"}
                    )
                    continue
                if not is_writer:
                    await websocket.send_json({"type": "error", "reason": "read_only"})
                    continue
                try:
                    seq = int(doc["seq"])
                    camera = _camera_from_message(doc)
                except (KeyError, TypeError, ValueError, InvalidInput) as exc:
                    await websocket.send_json(
                        {"type": "error", "reason": "bad_message", "detail": str(exc)}
                    )
                    continue
                with session.lock:
                    if seq <= session.last_seq:
                        await websocket.send_json(
                            {
                                "type": "error",
                                "reason": "stale_sequence",
                                "current": session.last_seq,
                            }
                        )
                        continue
                    if session.cameras and (
                        camera.width != session.cameras[0].width
                        or camera.height != session.cameras[0].height
                    ):
                        await websocket.send_json(
                            {"type": "error", "reason": "size_mismatch"}
                        )
                        continue
                    session.last_seq = seq
                    session.cameras.append(camera)
                frame = render(session.cloud, camera, session.splat_radius)
                image_png = _png_bytes(fileio.save_image_png, frame.image)
                mask_png = _png_bytes(fileio.save_mask_png, frame.mask)
                header = struct.pack("<III", seq, len(image_png), len(mask_png))
                await websocket.send_bytes(header + image_png + mask_png)
        except WebSocketDisconnect:
            pass
        finally:
            if is_writer:
                with session.lock:
                    session.writer_active = False

    return app


def serve(cache: Cache3D, host: str = "127.0.0.1", port: int = 8000, splat_radius: float = 0):
    """Run the streaming server until interrupted."""
    import uvicorn

    uvicorn.run(make_app(cache, splat_radius), host=host, port=port)
