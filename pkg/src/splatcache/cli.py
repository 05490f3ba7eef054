"""Command-line interface.

Subcommands: synth, build-cache, render, fuse, align, autoregress, eval,
serve, traj.  Exit codes: 0 success, 1 usage error, 2 data error.  All
commands are deterministic given the same inputs and ``--seed``.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

import numpy as np

from . import align as align_mod
from . import cache as cache_mod
from . import fileio, fusion, metrics, pipeline, synthworld
from .errors import InvalidInput
from .geometry import Trajectory, interpolate_trajectory, offset_trajectory


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems instead of argparse's 2
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _frame_name(i: int) -> str:
    return f"frame_{i:03d}"


def _load_trajectory(path) -> Trajectory:
    try:
        return Trajectory.load(path)
    except FileNotFoundError as exc:
        raise InvalidInput(f"trajectory file not found: {path}") from exc


def _load_scene(path) -> synthworld.Scene:
    try:
        with open(path) as fh:
            return synthworld.load_scene_or_spec(fh.read())
    except FileNotFoundError as exc:
        raise InvalidInput(f"scene file not found: {path}") from exc


def _sorted_pngs(directory, prefix="frame_"):
    paths = sorted(glob.glob(os.path.join(directory, f"{prefix}*.png")))
    if not paths:
        raise InvalidInput(f"no {prefix}*.png files in {directory}")
    return paths


# ---------------------------------------------------------------------------
# Handlers


def _cmd_synth(args) -> int:
    scene = _load_scene(args.scene)
    traj = _load_trajectory(args.trajectory)
    img_dir = os.path.join(args.out, "images")
    depth_dir = os.path.join(args.out, "depth")
    os.makedirs(img_dir, exist_ok=True)
    os.makedirs(depth_dir, exist_ok=True)
    for i, camera in enumerate(traj):
        time = i if args.animate else 0
        image, depth = synthworld.raster_ground_truth(scene, camera, time=time)
        fileio.save_image_png(os.path.join(img_dir, _frame_name(i) + ".png"), image)
        fileio.save_pfm(
            os.path.join(depth_dir, _frame_name(i) + ".pfm"), depth.values, depth.valid
        )
    with open(os.path.join(args.out, "scene.json"), "w") as fh:
        fh.write(synthworld.scene_to_json(scene))
    print(f"wrote {len(traj)} frames to {args.out}")
    return 0


def _posed_frames_from_dirs(images_dir, depth_dir, traj):
    frames = []
    for i, camera in enumerate(traj):
        img_path = os.path.join(images_dir, _frame_name(i) + ".png")
        pfm_path = os.path.join(depth_dir, _frame_name(i) + ".pfm")
        if not os.path.exists(img_path):
            raise InvalidInput(f"missing image {img_path}")
        if not os.path.exists(pfm_path):
            raise InvalidInput(f"missing depth {pfm_path}")
        image = fileio.load_image_png(img_path)
        values, valid = fileio.load_pfm(pfm_path)
        depth = cache_mod.DepthMap(values=np.where(valid, values, 0.0), valid=valid)
        frames.append(cache_mod.PostedFrame(image=image, depth=depth, camera=camera))
    return frames


def _cmd_build_cache(args) -> int:
    traj = _load_trajectory(args.trajectory)
    frames = _posed_frames_from_dirs(args.images, args.depth, traj)
    length = args.length if args.length is not None else len(traj)
    if args.mode == "single":
        built = cache_mod.build_single(frames[0], length)
    elif args.mode == "multiview":
        built = cache_mod.build_multiview(frames, length)
    else:  # dynamic: the input sequence is one moving view
        built = cache_mod.build_dynamic([frames])
    cache_mod.save_cache(built, args.out)
    print(f"cache: {built.length} steps x {built.views} views -> {args.out}")
    return 0


def _cmd_render(args) -> int:
    cached = cache_mod.load_cache(args.cache)
    traj = _load_trajectory(args.trajectory)
    if cached.length != len(traj):
        if cached.temporally_shared():
            cached = cache_mod.broadcast_temporal(cached, len(traj))
        else:
            raise InvalidInput(
                f"cache length {cached.length} != trajectory length {len(traj)}"
            )
    from .splat import render_guidance

    videos = render_guidance(cached, traj, args.splat_radius)
    for video in videos:
        vdir = os.path.join(args.out, f"v{video.view_index:03d}")
        os.makedirs(vdir, exist_ok=True)
        for t, frame in enumerate(video.frames):
            stem = _frame_name(t)
            fileio.save_image_png(os.path.join(vdir, stem + ".png"), frame.image)
            fileio.save_mask_png(os.path.join(vdir, f"mask_{t:03d}.png"), frame.mask)
            fileio.save_pfm(
                os.path.join(vdir, f"depth_{t:03d}.pfm"),
                frame.depth,
                frame.mask,
            )
    print(f"rendered {len(videos)} view(s) x {len(traj)} frames -> {args.out}")
    return 0


def _load_guidance_dir(directory):
    from .splat import GuidanceVideo, RenderedFrame

    view_dirs = sorted(glob.glob(os.path.join(directory, "v[0-9]*")))
    if not view_dirs:
        raise InvalidInput(f"no view subdirectories under {directory}")
    videos = []
    for vi, vdir in enumerate(view_dirs):
        frame_paths = _sorted_pngs(vdir)
        frames = []
        for t, fpath in enumerate(frame_paths):
            image = fileio.load_image_png(fpath)
            mask_path = os.path.join(vdir, f"mask_{t:03d}.png")
            if not os.path.exists(mask_path):
                raise InvalidInput(f"missing mask {mask_path}")
            mask = fileio.load_mask_png(mask_path)
            depth = np.zeros(mask.shape)
            pfm_path = os.path.join(vdir, f"depth_{t:03d}.pfm")
            if os.path.exists(pfm_path):
                depth, _ = fileio.load_pfm(pfm_path)
            frames.append(RenderedFrame(image=image, mask=mask, depth=depth))
        videos.append(GuidanceVideo(frames=tuple(frames), view_index=vi))
    return videos


def _cmd_fuse(args) -> int:
    if args.strategy == "explicit":
        if not args.clouds or not args.out:
            raise InvalidInput("explicit fusion needs --clouds and --out")
        clouds = []
        for path in args.clouds:
            positions, colors, source_pixel = fileio.load_ply(path)
            clouds.append(cache_mod.PointCloud(positions, colors, source_pixel))
        merged = fusion.fuse_explicit(clouds)
        fileio.save_ply(args.out, merged.positions, merged.colors, merged.source_pixel)
        print(f"merged {len(clouds)} clouds ({len(merged)} points) -> {args.out}")
        return 0

    if not args.guidance:
        raise InvalidInput("latent fusion needs --guidance")
    videos = _load_guidance_dir(args.guidance)
    masked = []
    for video in videos:
        latent = fusion.encode(list(video.frames), patch=args.patch, channels=args.channels)
        mask = fusion.video_latent_mask(list(video.frames), patch=args.patch)
        masked.append(fusion.masked_latent(latent, mask))

    if args.strategy == "concat":
        fused = fusion.fuse_concat(masked)
        fileio.save_container(args.out, fused.values)
        print(f"concat latents {fused.values.shape} -> {args.out}")
        return 0

    sched = fusion.NoiseSchedulePoint(
        tau=args.tau, alpha=args.alpha, sigma=args.sigma, seed=args.seed
    )
    noisy = fusion.make_noisy_latent(
        fusion.LatentVideo(values=np.zeros_like(masked[0].values), patch=args.patch),
        sched,
    )
    weights = fusion.InLayerWeights.from_seed(args.channels, args.features, args.seed)
    fused = fusion.fuse_max([fusion.in_layer(z, noisy, weights) for z in masked])
    fileio.save_container(args.out, fused.values)
    print(f"max-pool features {fused.values.shape} -> {args.out}")
    return 0


def _cmd_align(args) -> int:
    src_values, src_valid = fileio.load_pfm(args.source)
    tgt_values, tgt_valid = fileio.load_pfm(args.target)
    source = cache_mod.DepthMap(np.where(src_valid, src_values, 0.0), src_valid)
    target = cache_mod.DepthMap(np.where(tgt_valid, tgt_values, 0.0), tgt_valid)
    mask = np.ones(source.shape, dtype=bool)
    if args.mask:
        mask = fileio.load_mask_png(args.mask)
    fit = align_mod.align_depth(source, target, mask)
    print(f"{fit.scale!r} {fit.shift!r} {fit.residual_rms!r} {fit.support}")
    return 0


def _cmd_autoregress(args) -> int:
    cached = cache_mod.load_cache(args.cache)
    traj = _load_trajectory(args.trajectory)
    if args.depth == "oracle":
        if not args.scene:
            raise InvalidInput("--depth oracle needs --scene")
        provider: pipeline.DepthProvider = pipeline.OracleDepthProvider(
            _load_scene(args.scene)
        )
    elif args.depth.startswith("dir:"):
        provider = pipeline.DirectoryDepthProvider(args.depth[4:])
    else:
        raise InvalidInput("--depth must be 'oracle' or 'dir:<path>'")

    result = pipeline.run_autoregressive(
        cached,
        traj,
        depth_provider=provider,
        chunk_len=args.chunk_len,
        splat_radius=args.splat_radius,
        update_cache=not args.no_update,
    )
    os.makedirs(args.out, exist_ok=True)
    for i, frame in enumerate(result.frames):
        fileio.save_image_png(os.path.join(args.out, _frame_name(i) + ".png"), frame.image)
    manifest = {
        "frames": len(result.frames),
        "chunk_len": result.plan.chunk_len,
        "chunks": [list(c) for c in result.plan.chunks],
        "coverage": result.coverage,
        "views_added": result.views_added,
        "alignments": [
            {
                "scale": a.scale,
                "shift": a.shift,
                "residual_rms": a.residual_rms,
                "support": a.support,
            }
            for a in result.alignments
        ],
        "seed": args.seed,
    }
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    print(
        f"{len(result.frames)} frames in {len(result.plan.chunks)} chunks, "
        f"{result.views_added} views added -> {args.out}"
    )
    return 0


def _cmd_eval(args) -> int:
    pred_paths = _sorted_pngs(args.pred)
    gt_paths = _sorted_pngs(args.gt)
    if len(pred_paths) != len(gt_paths):
        raise InvalidInput(
            f"{len(pred_paths)} predictions vs {len(gt_paths)} ground-truth frames"
        )
    preds = [fileio.load_image_png(p) for p in pred_paths]
    gts = [fileio.load_image_png(p) for p in gt_paths]
    masks = None
    if args.mask:
        mask_paths = sorted(glob.glob(os.path.join(args.mask, "mask_*.png")))
        if len(mask_paths) != len(pred_paths):
            raise InvalidInput("need one mask per frame")
        masks = [fileio.load_mask_png(p) for p in mask_paths]
    report = metrics.video_report(preds, gts, masks)
    with open(args.report, "w") as fh:
        fh.write(report.to_json())
    print(f"psnr {report.psnr_mean:.3f} dB  ssim {report.ssim_mean:.5f} -> {args.report}")
    return 0


def _cmd_serve(args) -> int:
    from .server import serve

    cached = cache_mod.load_cache(args.cache)
    serve(cached, host=args.host, port=args.port, splat_radius=args.splat_radius)
    return 0


def _cmd_traj(args) -> int:
    if args.traj_command == "interpolate":
        keys = _load_trajectory(args.keyframes)
        out = interpolate_trajectory(list(keys.frames), args.frames)
    elif args.traj_command == "offset":
        out = offset_trajectory(_load_trajectory(args.input), args.lateral)
    else:
        raise _UsageError("traj needs a subcommand (interpolate or offset)")
    out.save(args.out)
    print(f"{len(out)} frames -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> _Parser:
    parser = _Parser(prog="splatcache", description=__doc__)
    parser.add_argument("--seed", type=int, default=0, help="global RNG seed")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("synth", help="render ground-truth RGB-D from a synthetic scene")
    p.add_argument("--scene", required=True, help="scene JSON (full doc or seeded spec)")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--animate", action="store_true", help="advance scene time per frame")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("build-cache", help="lift posed RGB-D frames into a point cache")
    p.add_argument("--images", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["single", "multiview", "dynamic"], default="multiview")
    p.add_argument("--length", type=int, default=None, help="temporal length (static modes)")
    p.set_defaults(func=_cmd_build_cache)

    p = sub.add_parser("render", help="splat a cache along a trajectory")
    p.add_argument("--cache", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--splat-radius", type=float, default=0)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("fuse", help="fuse multi-view guidance")
    p.add_argument("--strategy", choices=["maxpool", "concat", "explicit"], required=True)
    p.add_argument("--guidance", help="directory produced by `render`")
    p.add_argument("--clouds", nargs="+", help="PLY files (explicit strategy)")
    p.add_argument("--out", required=True)
    p.add_argument("--patch", type=int, default=fusion.DEFAULT_PATCH)
    p.add_argument("--channels", type=int, default=fusion.DEFAULT_CHANNELS)
    p.add_argument("--features", type=int, default=8)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("align", help="scale/shift depth alignment")
    p.add_argument("--source", required=True, help="PFM to align")
    p.add_argument("--target", required=True, help="PFM to align to")
    p.add_argument("--mask", default=None, help="optional PNG mask")
    p.set_defaults(func=_cmd_align)

    p = sub.add_parser("autoregress", help="chunked generation with cache updates")
    p.add_argument("--cache", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--chunk-len", type=int, default=14)
    p.add_argument("--depth", required=True, help="'oracle' or 'dir:<path>'")
    p.add_argument("--scene", default=None, help="scene JSON for --depth oracle")
    p.add_argument("--out", required=True)
    p.add_argument("--splat-radius", type=float, default=0)
    p.add_argument("--no-update", action="store_true", help="disable cache updates")
    p.set_defaults(func=_cmd_autoregress)

    p = sub.add_parser("eval", help="PSNR/SSIM report for a rendered sequence")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mask", default=None)
    p.add_argument("--report", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("serve", help="interactive pose-streaming server")
    p.add_argument("--cache", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--splat-radius", type=float, default=0)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("traj", help="trajectory tools")
    tsub = p.add_subparsers(dest="traj_command")
    ti = tsub.add_parser("interpolate", help="resample keyframes (slerp + lerp)")
    ti.add_argument("--keyframes", required=True, help="trajectory JSON of keyframes")
    ti.add_argument("--frames", type=int, required=True)
    ti.add_argument("--out", required=True)
    to = tsub.add_parser("offset", help="shift every camera along its right axis")
    to.add_argument("--input", required=True)
    to.add_argument("--lateral", type=float, required=True)
    to.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_traj)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if getattr(args, "command", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
