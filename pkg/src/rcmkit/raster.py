"""Z-buffered software rasterizer producing RCM / RGB / depth / mask buffers.

One sample per pixel at the pixel center, top-left fill rule, no culling,
perspective-correct attribute interpolation, near-plane clipping. Rendering
is deterministic: triangles are traversed in index order and exact depth
ties keep the earlier triangle.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import CameraIntrinsics, Pose6DoF, Z_NEAR, interpolate_pose
from .images import save_depth_raw, save_mask, save_png_rgb
from .mesh import Mesh, RcmColors, sample_texture_many

# Depth deltas below this are ties; the earlier triangle keeps the pixel.
DEPTH_TIE_EPS = 1e-12

DEFAULT_BACKGROUND = (255, 255, 255)

# Color shown in the RGB buffer when a mesh has neither texture nor vertex colors.
UNCOLORED_GRAY = (128, 128, 128)


class ColorCountMismatchError(ValueError):
    pass


@dataclass
class FrameBuffers:
    """Per-frame render targets sharing one resolution.

    rcm/rgb: (H, W, 3) uint8; depth: (H, W) float32, +inf where uncovered;
    mask: (H, W) bool. Background pixels carry the configured background
    color. Immutable by convention once returned.
    """

    rcm: np.ndarray
    rgb: np.ndarray
    depth: np.ndarray
    mask: np.ndarray
    width: int
    height: int

    def save(self, out_dir, prefix: str, modes=("rcm", "rgb", "depth", "mask")) -> list:
        """Write the requested buffers; returns the paths written."""
        out_dir = Path(out_dir)
        written = []
        for mode in modes:
            if mode == "rcm":
                p = out_dir / f"{prefix}_rcm.png"
                save_png_rgb(self.rcm, p)
                written.append(p)
            elif mode == "rgb":
                p = out_dir / f"{prefix}_rgb.png"
                save_png_rgb(self.rgb, p)
                written.append(p)
            elif mode == "mask":
                p = out_dir / f"{prefix}_mask.png"
                save_mask(self.mask, p)
                written.append(p)
            elif mode == "depth":
                p = out_dir / f"{prefix}_depth.bin"
                save_depth_raw(self.depth, p)
                written.extend([p, Path(str(p) + ".json")])
            else:
                raise ValueError(f"unknown buffer mode {mode!r}")
        return written


def resolve_vertex_colors(mesh: Mesh) -> np.ndarray:
    """Per-vertex display colors as (Nv, 3) float64.

    Texture (sampled at each vertex UV) takes precedence over stored vertex
    colors; meshes with neither get a uniform gray.
    """
    if mesh.texture is not None:
        return sample_texture_many(mesh.texture, mesh.uvs).astype(np.float64)
    if mesh.vertex_rgb is not None:
        return mesh.vertex_rgb.astype(np.float64)
    return np.full((mesh.n_vertices, 3), UNCOLORED_GRAY[0], dtype=np.float64)


def _clip_near(tri_cam: np.ndarray, tri_attr: np.ndarray) -> list:
    """Clip one camera-space triangle against z = Z_NEAR.

    Attributes vary linearly over the 3D triangle, so edge interpolation in
    camera space is exact. Returns a list of (verts (3,3), attrs (3,K))
    sub-triangles (0, 1, or 2 of them).
    """
    inside = tri_cam[:, 2] > Z_NEAR
    if inside.all():
        return [(tri_cam, tri_attr)]
    if not inside.any():
        return []
    poly_v: list = []
    poly_a: list = []
    for i in range(3):
        j = (i + 1) % 3
        vi, vj = tri_cam[i], tri_cam[j]
        ai, aj = tri_attr[i], tri_attr[j]
        if inside[i]:
            poly_v.append(vi)
            poly_a.append(ai)
        if inside[i] != inside[j]:
            s = (Z_NEAR - vi[2]) / (vj[2] - vi[2])
            poly_v.append(vi + s * (vj - vi))
            poly_a.append(ai + s * (aj - ai))
    out = []
    for k in range(1, len(poly_v) - 1):
        out.append(
            (
                np.stack([poly_v[0], poly_v[k], poly_v[k + 1]]),
                np.stack([poly_a[0], poly_a[k], poly_a[k + 1]]),
            )
        )
    return out


def _raster_one(
    verts: np.ndarray,
    attrs: np.ndarray,
    intr: CameraIntrinsics,
    depth: np.ndarray,
    attr_buf: np.ndarray,
    mask: np.ndarray,
) -> None:
    """Rasterize one camera-space triangle into the shared buffers."""
    z = verts[:, 2]
    sx = intr.fx * verts[:, 0] / z + intr.cx
    sy = intr.fy * verts[:, 1] / z + intr.cy

    area2 = (sx[1] - sx[0]) * (sy[2] - sy[0]) - (sy[1] - sy[0]) * (sx[2] - sx[0])
    if abs(area2) < 1e-12:
        return
    # Orient so the interior has positive edge functions.
    order = (0, 1, 2) if area2 > 0 else (0, 2, 1)
    sx, sy, z, attrs = sx[list(order)], sy[list(order)], z[list(order)], attrs[list(order)]
    area2 = abs(area2)

    x_lo = max(int(np.floor(sx.min() - 0.5)), 0)
    x_hi = min(int(np.ceil(sx.max() - 0.5)), intr.width - 1)
    y_lo = max(int(np.floor(sy.min() - 0.5)), 0)
    y_hi = min(int(np.ceil(sy.max() - 0.5)), intr.height - 1)
    if x_lo > x_hi or y_lo > y_hi:
        return

    px = np.arange(x_lo, x_hi + 1) + 0.5
    py = np.arange(y_lo, y_hi + 1) + 0.5
    pxg, pyg = np.meshgrid(px, py)

    # Edge k runs opposite vertex k; w_k is the (unnormalized) weight of vertex k.
    ws = []
    for k in range(3):
        u = (k + 1) % 3
        v = (k + 2) % 3
        w = (sx[v] - sx[u]) * (pyg - sy[u]) - (sy[v] - sy[u]) * (pxg - sx[u])
        dy = sy[v] - sy[u]
        dx = sx[v] - sx[u]
        top_left = dy < 0 or (dy == 0 and dx > 0)
        ws.append((w, top_left))
    inside = np.ones_like(pxg, dtype=bool)
    for w, top_left in ws:
        inside &= (w > 0) | ((w == 0) & top_left)
    if not inside.any():
        return

    w0, w1, w2 = ws[0][0], ws[1][0], ws[2][0]
    alpha = w0 / area2
    beta = w1 / area2
    gamma = 1.0 - alpha - beta
    _ = w2  # gamma from partition of unity; w2 only gates coverage

    inv_z = 1.0 / z
    denom = alpha * inv_z[0] + beta * inv_z[1] + gamma * inv_z[2]
    z_px = 1.0 / denom

    sub_d = depth[y_lo : y_hi + 1, x_lo : x_hi + 1]
    win = inside & (z_px < sub_d - DEPTH_TIE_EPS)
    if not win.any():
        return

    a = alpha[win][:, None] * inv_z[0]
    b = beta[win][:, None] * inv_z[1]
    c = gamma[win][:, None] * inv_z[2]
    attr_px = z_px[win][:, None] * (a * attrs[0] + b * attrs[1] + c * attrs[2])

    sub_a = attr_buf[y_lo : y_hi + 1, x_lo : x_hi + 1]
    sub_m = mask[y_lo : y_hi + 1, x_lo : x_hi + 1]
    sub_d[win] = z_px[win]
    sub_a[win] = attr_px
    sub_m[win] = True


def rasterize(
    mesh: Mesh,
    rcm_colors: RcmColors,
    object_pose: Pose6DoF,
    cam_pose: Pose6DoF,
    intr: CameraIntrinsics,
    background=DEFAULT_BACKGROUND,
) -> FrameBuffers:
    """Render the posed mesh into RCM / RGB / depth / mask buffers.

    RCM and display colors are both interpolated perspective-correctly from
    the 8-bit per-vertex values and rounded to the nearest integer.
    """
    if len(rcm_colors) != mesh.n_vertices:
        raise ColorCountMismatchError(
            f"{len(rcm_colors)} colors for {mesh.n_vertices} vertices"
        )
    h, w = intr.height, intr.width
    depth = np.full((h, w), np.inf)
    attr_buf = np.zeros((h, w, 6))
    mask = np.zeros((h, w), dtype=bool)

    cam_verts = cam_pose.apply(object_pose.apply(mesh.positions))
    attrs = np.concatenate(
        [rcm_colors.quantized.astype(np.float64), resolve_vertex_colors(mesh)], axis=1
    )

    for tri in mesh.triangles:
        tri_cam = cam_verts[tri]
        if np.all(tri_cam[:, 2] <= Z_NEAR):
            continue
        for verts, tri_attr in _clip_near(tri_cam, attrs[tri]):
            _raster_one(verts, tri_attr, intr, depth, attr_buf, mask)

    bg = np.asarray(background, dtype=np.float64)
    rcm = np.where(mask[:, :, None], np.rint(attr_buf[:, :, :3]), bg)
    rgb = np.where(mask[:, :, None], np.rint(attr_buf[:, :, 3:]), bg)
    return FrameBuffers(
        rcm=np.clip(rcm, 0, 255).astype(np.uint8),
        rgb=np.clip(rgb, 0, 255).astype(np.uint8),
        depth=depth.astype(np.float32),
        mask=mask,
        width=w,
        height=h,
    )


def render_sequence(
    mesh: Mesh,
    rcm_colors: RcmColors,
    traj,
    cam_pose: Pose6DoF,
    intr: CameraIntrinsics,
    n_frames: int,
    background=DEFAULT_BACKGROUND,
) -> list:
    """Render n_frames frames; frame i is posed at first_keyframe_time + i / fps."""
    if n_frames < 1:
        raise ValueError("need at least one frame")
    t0 = traj.keyframes[0][0]
    frames = []
    for i in range(n_frames):
        pose = interpolate_pose(traj, t0 + i / traj.fps)
        frames.append(rasterize(mesh, rcm_colors, pose, cam_pose, intr, background))
    return frames
