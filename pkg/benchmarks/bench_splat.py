"""Benchmark the z-buffer splat kernels and verify they agree bit for bit.

Builds seeded point clouds, projects them into a novel camera exactly the
way the renderer does, then times every importable kernel backend on the
same inputs.  The compiled backend must reproduce the pure-numpy winner
grid exactly; any mismatch aborts with a nonzero exit code.

Run from the repository root:

    python benchmarks/bench_splat.py
    python benchmarks/bench_splat.py --repeats 7 --radii 0 1 2
"""

import argparse
import time

import numpy as np

import splatcache as sc
from splatcache import _kernels
from splatcache.splat import Z_EPSILON, Z_NEAR


def make_workload(width, height, seed):
    """Project a two-view merged cloud into an offset camera.

    Returns the exact (ix, iy, depth) arrays the renderer would hand the
    kernel for this camera, after near-plane culling and pixel rounding.
    """
    scene = sc.make_scene(sc.SceneSpec(seed=seed, primitive_count=4))
    fx = 110.0 * width / 96.0
    intrinsics = sc.Intrinsics(
        fx=fx, fy=fx, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        width=width, height=height,
    )
    base = sc.Camera(intrinsics, sc.Pose(np.eye(3), np.zeros(3)))

    def offset(position):
        z_axis = np.array([0.0, 0.0, 3.0]) - position
        z_axis = z_axis / np.linalg.norm(z_axis)
        x_axis = np.cross(np.array([0.0, 1.0, 0.0]), z_axis)
        x_axis = x_axis / np.linalg.norm(x_axis)
        y_axis = np.cross(z_axis, x_axis)
        rotation = np.stack([x_axis, y_axis, z_axis])
        return sc.Camera(intrinsics, sc.Pose(rotation, -rotation @ np.asarray(position)))

    views = [base, offset(np.array([0.4, -0.2, 0.2]))]
    cloud = sc.fuse_explicit(
        [sc.unproject_frame(sc.posed_frame(scene, cam)) for cam in views]
    )
    target = offset(np.array([-0.3, 0.15, 0.1]))
    pixels, z = sc.project_points(cloud.positions, target)
    keep = z > Z_NEAR
    ix = np.floor(np.clip(pixels[keep, 0], -1e9, 1e9) + 0.5).astype(np.int64)
    iy = np.floor(np.clip(pixels[keep, 1], -1e9, 1e9) + 0.5).astype(np.int64)
    return ix, iy, z[keep], height, width


def best_time(kernel, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        kernel(*args)
        best = min(best, time.perf_counter() - started)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats; best is kept")
    parser.add_argument("--radii", type=float, nargs="+", default=[0.0, 1.0, 2.0])
    parser.add_argument(
        "--resolutions", type=str, nargs="+", default=["160x120", "320x240", "640x480"],
        help="camera sizes as WxH",
    )
    parser.add_argument("--seed", type=int, default=11)
    opts = parser.parse_args(argv)

    backends = _kernels.available_backends()
    print(f"backends: {', '.join(backends)} (active: {_kernels.BACKEND})")
    if "cython" not in backends:
        print("compiled kernel not built; timing the numpy fallback only")

    header = f"{'workload':>22} {'points':>8}" + "".join(
        f" {name + ' (ms)':>12}" for name in backends
    )
    if len(backends) > 1:
        header += f" {'speedup':>8}"
    print(header)

    failures = 0
    for size in opts.resolutions:
        width, height = (int(part) for part in size.lower().split("x"))
        ix, iy, depth, h, w = make_workload(width, height, opts.seed)
        for radius in opts.radii:
            args = (ix, iy, depth, h, w, float(radius), Z_EPSILON)
            winners = {name: kernel(*args) for name, kernel in backends.items()}
            reference = winners["numpy"]
            for name, winner in winners.items():
                if not np.array_equal(winner, reference):
                    print(f"  MISMATCH: {name} differs from numpy at {size} r={radius}")
                    failures += 1
            times = {
                name: best_time(kernel, args, opts.repeats)
                for name, kernel in backends.items()
            }
            row = f"{size + f' r={radius:g}':>22} {len(ix):>8}" + "".join(
                f" {times[name] * 1e3:>12.3f}" for name in backends
            )
            if "cython" in times:
                row += f" {times['numpy'] / times['cython']:>7.1f}x"
            print(row)

    if failures:
        print(f"{failures} backend mismatches")
        return 1
    print("all backends bit-identical")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
