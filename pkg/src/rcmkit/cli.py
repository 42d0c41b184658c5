"""Command-line interface: render sequences, build caches, score consistency.

Exit codes: 0 success, 1 user/input error, 2 internal error. All subcommands
are deterministic: identical arguments and input files produce byte-identical
outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import cache as cache_mod
from . import consistency, geometry, images, mesh as mesh_mod, raster

_USER_ERRORS = (
    FileNotFoundError,
    ValueError,
    KeyError,
    json.JSONDecodeError,
    mesh_mod.MeshError,
    cache_mod.CacheError,
    geometry.EmptyTrajectoryError,
)


def _parse_background(text: str) -> tuple:
    text = text.lstrip("#")
    if len(text) != 6:
        raise ValueError(f"background must be RRGGBB hex, got {text!r}")
    return tuple(int(text[i : i + 2], 16) for i in (0, 2, 4))


DEFAULT_CAMERA = geometry.CameraIntrinsics(
    fx=512.0, fy=512.0, cx=256.0, cy=256.0, width=512, height=512
)


def _load_camera(path):
    """Camera JSON: either a bare intrinsics object or {"intrinsics", "pose"}.

    A missing path falls back to a 512x512 camera with a ~53 degree field of
    view and identity pose.
    """
    if path is None:
        return DEFAULT_CAMERA, geometry.Pose6DoF.identity()
    with open(path) as f:
        d = json.load(f)
    if "intrinsics" in d:
        intr = geometry.CameraIntrinsics.from_dict(d["intrinsics"])
        pose = geometry.Pose6DoF.from_dict(d["pose"]) if "pose" in d else geometry.Pose6DoF.identity()
    else:
        intr = geometry.CameraIntrinsics.from_dict(d)
        pose = geometry.Pose6DoF.identity()
    return intr, pose


def _load_mesh_args(args):
    return mesh_mod.load_mesh(args.mesh, texture_path=args.texture)


def cmd_render(args) -> int:
    mesh = _load_mesh_args(args)
    traj = geometry.PoseTrajectory.load(args.trajectory)
    intr, cam_pose = _load_camera(args.camera)
    background = _parse_background(args.background)
    modes = tuple(m.strip() for m in args.modes.split(",") if m.strip())
    for m in modes:
        if m not in ("rcm", "rgb", "depth", "mask"):
            raise ValueError(f"unknown render mode {m!r}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    aabb = mesh_mod.compute_aabb(mesh)
    colors = mesh_mod.compute_rcm_colors(mesh, aabb)
    written = []
    try:
        frames = raster.render_sequence(
            mesh, colors, traj, cam_pose, intr, args.frames, background
        )
        for i, fb in enumerate(frames):
            written.extend(fb.save(out_dir, f"frame_{i}", modes=modes))
    except Exception:
        for p in written:
            Path(p).unlink(missing_ok=True)
        raise
    print(f"wrote {len(written)} files to {out_dir}")
    return 0


def cmd_cache(args) -> int:
    if args.views < 1:
        raise ValueError("views must be >= 1")
    mesh = _load_mesh_args(args)
    intr, _ = _load_camera(args.camera)
    background = _parse_background(args.background)
    built = cache_mod.build_cache(
        mesh,
        n_views=args.views,
        intr=intr,
        radius_factor=args.radius_factor,
        out_dir=args.out,
        background=background,
    )
    print(built.root / cache_mod.MANIFEST_NAME)
    return 0


def cmd_tssim(args) -> int:
    if args.oracle:
        for required in ("mesh", "trajectory"):
            if getattr(args, required) is None:
                raise ValueError(f"--oracle mode requires --{required}")
        mesh = _load_mesh_args(args)
        traj = geometry.PoseTrajectory.load(args.trajectory)
        intr, cam_pose = _load_camera(args.camera)
        aabb = mesh_mod.compute_aabb(mesh)
        colors = mesh_mod.compute_rcm_colors(mesh, aabb)
        frames, maps, cams = consistency.oracle_pointmaps(
            mesh, colors, traj, cam_pose, intr, args.frames
        )
    else:
        if args.manifest is None:
            raise ValueError("provide --manifest, or --oracle with mesh/trajectory/camera")
        frames, maps, cams = consistency.load_frames_manifest(args.manifest)
    report = consistency.compute_tssim(frames, maps, cams, splat_radius=args.splat_radius)
    with open(args.out, "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"{report.t_ssim:.4f}")
    return 0


def cmd_iou(args) -> int:
    a = images.load_mask(args.mask_a)
    b = images.load_mask(args.mask_b)
    print(f"{consistency.mask_iou(a, b):.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcmkit",
        description="Render relative coordinate maps of posed meshes and "
        "evaluate cross-frame geometry consistency.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a posed mesh sequence to image buffers")
    p.add_argument("--mesh", required=True, help="Wavefront OBJ file")
    p.add_argument("--texture", default=None, help="PNG texture (required when the OBJ has UVs)")
    p.add_argument("--trajectory", required=True, help="object pose trajectory JSON")
    p.add_argument("--camera", default=None,
                   help="camera JSON (intrinsics, optional pose); default 512x512 built-in")
    p.add_argument("--frames", type=int, default=1, help="number of frames (default 1)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--modes",
        default="rcm,rgb,depth,mask",
        help="comma-separated buffers to write (default rcm,rgb,depth,mask)",
    )
    p.add_argument(
        "--background",
        default="ffffff",
        help="background color as RRGGBB hex (default ffffff)",
    )
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("cache", help="build a sparse-view RCM/RGB reference cache")
    p.add_argument("--mesh", required=True, help="Wavefront OBJ file")
    p.add_argument("--texture", default=None, help="PNG texture")
    p.add_argument("--views", type=int, default=cache_mod.DEFAULT_N_VIEWS,
                   help=f"number of lattice views (default {cache_mod.DEFAULT_N_VIEWS})")
    p.add_argument("--camera", default=None,
                   help="camera JSON (intrinsics); default 512x512 built-in")
    p.add_argument(
        "--radius-factor",
        type=float,
        default=cache_mod.DEFAULT_RADIUS_FACTOR,
        help="camera distance as a multiple of the bounding-box diagonal "
        f"(default {cache_mod.DEFAULT_RADIUS_FACTOR})",
    )
    p.add_argument("--out", required=True, help="output cache directory")
    p.add_argument("--background", default="ffffff",
                   help="background color as RRGGBB hex (default ffffff)")
    p.set_defaults(func=cmd_cache)

    p = sub.add_parser("tssim", help="score cross-frame geometry consistency")
    p.add_argument("--manifest", default=None, help="frames manifest JSON (external point maps)")
    p.add_argument("--oracle", action="store_true",
                   help="derive point maps from the built-in renderer instead")
    p.add_argument("--mesh", default=None, help="OBJ file (oracle mode)")
    p.add_argument("--texture", default=None, help="PNG texture (oracle mode)")
    p.add_argument("--trajectory", default=None, help="trajectory JSON (oracle mode)")
    p.add_argument("--camera", default=None, help="camera JSON (oracle mode)")
    p.add_argument("--frames", type=int, default=1, help="frame count (oracle mode, default 1)")
    p.add_argument(
        "--splat-radius",
        type=int,
        default=consistency.DEFAULT_SPLAT_RADIUS,
        help=f"point splat radius in pixels (default {consistency.DEFAULT_SPLAT_RADIUS})",
    )
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_tssim)

    p = sub.add_parser("iou", help="intersection-over-union of two mask PNGs")
    p.add_argument("mask_a")
    p.add_argument("mask_b")
    p.set_defaults(func=cmd_iou)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal invariant violation
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
