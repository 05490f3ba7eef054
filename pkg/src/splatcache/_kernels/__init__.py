"""Rasterizer kernel selection.

The z-buffer resolution step is the hot loop of rendering.  A compiled
Cython kernel is used when the extension built; otherwise a pure-numpy
implementation takes over.  Both implement the same winner rule and produce
bit-identical results, which the test suite checks whenever the compiled
kernel is available.

Winner rule (shared contract)
-----------------------------
Each point covers the integer pixels within ``radius`` of its rounded
projection (offsets dx, dy with dx^2 + dy^2 <= radius^2).  Per pixel, let
zmin be the smallest covering depth; the winner is the lowest-index point
whose depth is <= zmin + z_eps.  The rule is order-independent, so any
evaluation schedule gives the same output.
"""

from . import _splat_np

try:  # pragma: no cover - exercised only when the extension is built
    from . import _splat_cy

    _ACTIVE = _splat_cy
    BACKEND = "cython"
except ImportError:  # pragma: no cover
    _ACTIVE = _splat_np
    BACKEND = "numpy"

rasterize = _ACTIVE.rasterize
disk_offsets = _splat_np.disk_offsets


def available_backends() -> dict:
    """Name -> rasterize callable for every importable backend."""
    backends = {"numpy": _splat_np.rasterize}
    if BACKEND == "cython":
        backends["cython"] = _splat_cy.rasterize
    return backends
