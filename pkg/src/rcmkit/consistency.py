"""Cross-frame geometry consistency scoring.

Per-frame 3D point maps are aggregated into one colored cloud, the cloud is
splatted back into every frame's camera, and each reprojection is compared
to its frame with SSIM. The temporal mean of those scores quantifies how
consistently the frames depict one rigid object. Point maps can come from an
external reconstruction (PLY + camera files via a frames manifest) or from
the built-in renderer-based oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

from .geometry import (
    CameraIntrinsics,
    Pose6DoF,
    Z_NEAR,
    unproject_pixels,
)
from .images import load_png_rgb
from .raster import DEFAULT_BACKGROUND, render_sequence

DEFAULT_SPLAT_RADIUS = 1

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03
_SSIM_L = 255.0

_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class PointMap:
    """Colored 3D points for one frame, one per foreground pixel.

    points: (N, 3) float64 world coordinates; colors: (N, 3) uint8;
    pixels: (N, 2) int64 (column, row) source coordinates in row-major order.
    """

    points: np.ndarray
    colors: np.ndarray
    pixels: np.ndarray
    width: int
    height: int
    frame_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=np.float64).reshape(-1, 3))
        object.__setattr__(self, "colors", np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3))
        object.__setattr__(self, "pixels", np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2))
        if not (len(self.points) == len(self.colors) == len(self.pixels)):
            raise ValueError("points/colors/pixels length mismatch")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("point map contains non-finite points")

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (N, 3) float64
    colors: np.ndarray  # (N, 3) uint8

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class ConsistencyReport:
    per_frame_ssim: tuple
    t_ssim: float
    n_frames: int
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return {
            "t_ssim": self.t_ssim,
            "per_frame_ssim": list(self.per_frame_ssim),
            "n_frames": self.n_frames,
            "warnings": list(self.warnings),
        }


def aggregate(maps: list) -> PointCloud:
    """Concatenate all frames' points in frame order; no de-duplication."""
    if not maps:
        raise ValueError("no point maps to aggregate")
    points = np.concatenate([m.points for m in maps], axis=0)
    colors = np.concatenate([m.colors for m in maps], axis=0)
    return PointCloud(points=points, colors=colors)


def reproject(
    cloud: PointCloud,
    intr: CameraIntrinsics,
    cam_pose: Pose6DoF,
    background=DEFAULT_BACKGROUND,
    splat_radius: int = DEFAULT_SPLAT_RADIUS,
) -> np.ndarray:
    """Splat the cloud into the camera; nearest point wins each pixel.

    Each surviving point paints the (2r+1)^2 square around the pixel it
    projects into. Exact depth ties resolve to the lower point index, so the
    output is invariant under point-order permutations otherwise.
    """
    if splat_radius < 0:
        raise ValueError("splat_radius must be >= 0")
    h, w = intr.height, intr.width
    image = np.empty((h, w, 3), dtype=np.uint8)
    image[:] = np.asarray(background, dtype=np.uint8)
    if len(cloud) == 0:
        return image

    cam = cam_pose.apply(cloud.points)
    z = cam[:, 2]
    keep = z > Z_NEAR
    if not keep.any():
        return image
    cam = cam[keep]
    z = z[keep]
    colors = cloud.colors[keep]
    ix = np.floor(intr.fx * cam[:, 0] / z + intr.cx).astype(np.int64)
    iy = np.floor(intr.fy * cam[:, 1] / z + intr.cy).astype(np.int64)
    r = splat_radius
    near = (ix >= -r) & (ix < w + r) & (iy >= -r) & (iy < h + r)
    ix, iy, z, colors = ix[near], iy[near], z[near], colors[near]
    if ix.size == 0:
        return image

    # Paint far-to-near so the nearest point lands last; the stable ascending
    # sort reversed puts the lower index last among exact ties.
    order = np.argsort(z, kind="stable")[::-1]
    ix, iy, colors = ix[order], iy[order], colors[order]

    offsets = np.arange(-r, r + 1)
    ox, oy = np.meshgrid(offsets, offsets)
    sx = (ix[:, None] + ox.ravel()[None, :]).ravel()
    sy = (iy[:, None] + oy.ravel()[None, :]).ravel()
    scolor = np.repeat(colors, offsets.size**2, axis=0)
    ok = (sx >= 0) & (sx < w) & (sy >= 0) & (sy < h)
    flat = image.reshape(-1, 3)
    flat[sy[ok] * w + sx[ok]] = scolor[ok]
    return image


def _to_luma(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3:
        image = image @ _LUMA_WEIGHTS
    return image


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def ssim(img_a: np.ndarray, img_b: np.ndarray) -> float:
    """Mean local structural similarity with an 11x11 Gaussian window.

    Sigma 1.5, K1=0.01, K2=0.03, dynamic range 255; RGB inputs are reduced to
    BT.601 luma first. Only fully-covered window positions contribute, so
    identical inputs score exactly 1. Bit-symmetric in its arguments.
    """
    a = _to_luma(img_a)
    b = _to_luma(img_b)
    if a.shape != b.shape:
        raise ValueError(f"image dimensions differ: {a.shape} vs {b.shape}")
    if min(a.shape) < _SSIM_WINDOW:
        raise ValueError(f"images must be at least {_SSIM_WINDOW}x{_SSIM_WINDOW}")
    win = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    mu_a = convolve2d(a, win, mode="valid")
    mu_b = convolve2d(b, win, mode="valid")
    var_a = convolve2d(a * a, win, mode="valid") - mu_a * mu_a
    var_b = convolve2d(b * b, win, mode="valid") - mu_b * mu_b
    cov = convolve2d(a * b, win, mode="valid") - mu_a * mu_b
    c1 = (_SSIM_K1 * _SSIM_L) ** 2
    c2 = (_SSIM_K2 * _SSIM_L) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def compute_tssim(
    frames: list,
    maps: list,
    cams: list,
    splat_radius: int = DEFAULT_SPLAT_RADIUS,
    background=DEFAULT_BACKGROUND,
) -> ConsistencyReport:
    """Aggregate all point maps once, reproject into every frame, score SSIM.

    cams is a list of (CameraIntrinsics, Pose6DoF) per frame. The overall
    score is the arithmetic mean of the per-frame SSIM values.
    """
    if not (len(frames) == len(maps) == len(cams)) or not frames:
        raise ValueError("frames, maps, and cams must have equal nonzero length")
    warnings = []
    for i, (frame, pmap) in enumerate(zip(frames, maps)):
        if frame.shape[:2] != (pmap.height, pmap.width):
            raise ValueError(f"frame {i}: point map dimensions do not match the image")
        if len(pmap) == 0:
            warnings.append(f"frame {i}: empty point map (no foreground)")
    cloud = aggregate(maps)
    scores = []
    for frame, (intr, pose) in zip(frames, cams):
        projected = reproject(cloud, intr, pose, background=background, splat_radius=splat_radius)
        scores.append(ssim(frame, projected))
    return ConsistencyReport(
        per_frame_ssim=tuple(scores),
        t_ssim=float(np.mean(scores)),
        n_frames=len(frames),
        warnings=tuple(warnings),
    )


def oracle_pointmaps(
    mesh,
    rcm_colors,
    traj,
    cam_pose: Pose6DoF,
    intr: CameraIntrinsics,
    n_frames: int,
    background=DEFAULT_BACKGROUND,
) -> tuple[list, list, list]:
    """Ground-truth frames, point maps, and cameras from the renderer.

    Each frame's depth buffer is unprojected into the object's rest frame
    using the equivalent moving camera (frame camera composed with that
    frame's object pose), mimicking a multi-view reconstruction whose world
    frame is the static object.
    """
    from .geometry import interpolate_pose

    buffers = render_sequence(mesh, rcm_colors, traj, cam_pose, intr, n_frames, background)
    t0 = traj.keyframes[0][0]
    frames, maps, cams = [], [], []
    for i, fb in enumerate(buffers):
        obj_pose = interpolate_pose(traj, t0 + i / traj.fps)
        view = cam_pose.compose(obj_pose)
        rows, cols = np.nonzero(fb.mask)
        pixels = np.stack([cols, rows], axis=1)
        centers = pixels + 0.5
        depths = fb.depth[rows, cols].astype(np.float64)
        points = (
            unproject_pixels(intr, view, centers, depths)
            if len(pixels)
            else np.empty((0, 3))
        )
        maps.append(
            PointMap(
                points=points,
                colors=fb.rgb[rows, cols],
                pixels=pixels,
                width=fb.width,
                height=fb.height,
                frame_index=i,
            )
        )
        frames.append(fb.rgb)
        cams.append((intr, view))
    return frames, maps, cams


def mask_iou(mask_a: np.ndarray, mask_b: np.ndarray) -> float:
    """Intersection over union of two binary masks; two empty masks score 1."""
    a = np.asarray(mask_a, dtype=bool)
    b = np.asarray(mask_b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask dimensions differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def save_pointmap_ply(pmap: PointMap, path) -> None:
    """Write an ASCII PLY with x y z red green blue u v per defined pixel."""
    lines = [
        "ply",
        "format ascii 1.0",
        f"comment width {pmap.width} height {pmap.height} frame {pmap.frame_index}",
        f"element vertex {len(pmap)}",
        "property double x",
        "property double y",
        "property double z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "property int u",
        "property int v",
        "end_header",
    ]
    for p, c, px in zip(pmap.points, pmap.colors, pmap.pixels):
        lines.append(
            f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g} {c[0]} {c[1]} {c[2]} {px[0]} {px[1]}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def load_pointmap_ply(path, frame_index: int = 0) -> PointMap:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ValueError(f"{path}: not a PLY file")
    n_vertex = None
    width = height = None
    names = []
    body_start = None
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "comment":
            kv = dict(zip(parts[1::2], parts[2::2]))
            width = int(kv.get("width", 0)) or width
            height = int(kv.get("height", 0)) or height
        elif parts[0] == "element" and parts[1] == "vertex":
            n_vertex = int(parts[2])
        elif parts[0] == "property":
            names.append(parts[2])
        elif parts[0] == "end_header":
            body_start = i + 1
            break
    if body_start is None or n_vertex is None:
        raise ValueError(f"{path}: malformed PLY header")
    required = ["x", "y", "z", "red", "green", "blue", "u", "v"]
    if any(r not in names for r in required):
        raise ValueError(f"{path}: PLY must provide properties {required}")
    col = {name: k for k, name in enumerate(names)}
    rows = [line.split() for line in lines[body_start : body_start + n_vertex]]
    if len(rows) != n_vertex:
        raise ValueError(f"{path}: expected {n_vertex} vertex rows")
    data = np.array(rows, dtype=np.float64) if rows else np.empty((0, len(names)))
    points = data[:, [col["x"], col["y"], col["z"]]]
    colors = data[:, [col["red"], col["green"], col["blue"]]].astype(np.uint8)
    pixels = data[:, [col["u"], col["v"]]].astype(np.int64)
    if width is None or height is None:
        width = int(pixels[:, 0].max()) + 1 if len(pixels) else 1
        height = int(pixels[:, 1].max()) + 1 if len(pixels) else 1
    return PointMap(
        points=points, colors=colors, pixels=pixels, width=width, height=height,
        frame_index=frame_index,
    )


def load_frames_manifest(path) -> tuple[list, list, list]:
    """Load a frames manifest: per-frame image, point-map PLY, and camera JSON.

    The camera file holds {"intrinsics": {...}, "pose": {...}} using the
    geometry module's JSON schemas. Returns (frames, maps, cams) ready for
    compute_tssim. Relative paths resolve against the manifest directory.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    root = path.parent
    manifest = json.loads(path.read_text())
    frames, maps, cams = [], [], []
    for i, entry in enumerate(manifest["frames"]):
        frames.append(load_png_rgb(root / entry["image"]))
        maps.append(load_pointmap_ply(root / entry["pointmap"], frame_index=i))
        cam = json.loads((root / entry["camera"]).read_text())
        cams.append(
            (CameraIntrinsics.from_dict(cam["intrinsics"]), Pose6DoF.from_dict(cam["pose"]))
        )
    if not frames:
        raise ValueError(f"{path}: manifest lists no frames")
    return frames, maps, cams
