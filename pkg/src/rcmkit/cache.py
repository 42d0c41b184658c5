"""Sparse-view reference cache: paired RCM / RGB renders plus a manifest.

The cache bundles n renders of one mesh from Fibonacci-lattice viewpoints,
each as an (RCM image, textured RGB image) pair, together with the camera
intrinsics, the mesh bounding box, and integrity hashes. Consumers can map
any cached RCM pixel back to a model-space point using only the stored box.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import CameraIntrinsics, Pose6DoF, project_points, sample_sphere_views
from .images import load_png_rgb
from .mesh import Aabb, Mesh, compute_aabb, compute_rcm_colors
from .raster import DEFAULT_BACKGROUND, rasterize

MANIFEST_NAME = "cache.json"

DEFAULT_N_VIEWS = 6
DEFAULT_RADIUS_FACTOR = 2.5


class CacheError(Exception):
    pass


class ObjectOutOfFrustumError(CacheError):
    pass


class ManifestMissingError(CacheError):
    pass


class ManifestCorruptError(CacheError):
    pass


class ImageMissingError(CacheError):
    pass


class MaskMismatchError(CacheError):
    pass


@dataclass(frozen=True)
class CacheEntry:
    index: int
    view_pose: Pose6DoF  # world-to-camera
    rcm_path: Path
    rgb_path: Path


@dataclass(frozen=True)
class RcmCache:
    entries: tuple
    intrinsics: CameraIntrinsics
    mesh_fingerprint: str
    aabb: Aabb
    background: tuple
    root: Path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _foreground(image: np.ndarray, background) -> np.ndarray:
    return np.any(image != np.asarray(background, dtype=np.uint8), axis=2)


def build_cache(
    mesh: Mesh,
    n_views: int = DEFAULT_N_VIEWS,
    intr: CameraIntrinsics | None = None,
    radius_factor: float = DEFAULT_RADIUS_FACTOR,
    out_dir=None,
    background=DEFAULT_BACKGROUND,
) -> RcmCache:
    """Render the mesh from n_views lattice viewpoints and write the cache.

    Cameras sit at radius_factor x (AABB diagonal) from the box center. Every
    view must contain the whole object; output bytes are deterministic for
    fixed inputs.
    """
    if n_views < 1:
        raise ValueError("need at least one view")
    if radius_factor <= 0:
        raise ValueError("radius_factor must be positive")
    if intr is None or out_dir is None:
        raise ValueError("intrinsics and out_dir are required")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    aabb = compute_aabb(mesh)
    colors = compute_rcm_colors(mesh, aabb)
    radius = radius_factor * aabb.diagonal
    views = sample_sphere_views(n_views, radius, aabb.center)

    identity = Pose6DoF.identity()
    entries = []
    manifest_entries = []
    for i, view in enumerate(views):
        pixels, _, in_front = project_points(intr, view, mesh.positions)
        visible = (
            in_front.all()
            and pixels[:, 0].min() >= 0
            and pixels[:, 0].max() < intr.width
            and pixels[:, 1].min() >= 0
            and pixels[:, 1].max() < intr.height
        )
        if not visible:
            raise ObjectOutOfFrustumError(
                f"view {i}: object exceeds the frustum; increase radius_factor"
            )
        fb = rasterize(mesh, colors, identity, view, intr, background)
        rcm_path = out_dir / f"view_{i}_rcm.png"
        rgb_path = out_dir / f"view_{i}_rgb.png"
        fb.save(out_dir, f"view_{i}", modes=("rcm", "rgb"))
        entries.append(CacheEntry(i, view, rcm_path, rgb_path))
        manifest_entries.append(
            {
                "index": i,
                "pose": view.to_dict(),
                "rcm": rcm_path.name,
                "rgb": rgb_path.name,
                "rcm_sha256": _sha256(rcm_path),
                "rgb_sha256": _sha256(rgb_path),
            }
        )

    manifest = {
        "entries": manifest_entries,
        "intrinsics": intr.to_dict(),
        "aabb": aabb.to_dict(),
        "mesh_fingerprint": mesh.fingerprint(),
        "background": list(background),
    }
    (out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RcmCache(
        entries=tuple(entries),
        intrinsics=intr,
        mesh_fingerprint=mesh.fingerprint(),
        aabb=aabb,
        background=tuple(int(c) for c in background),
        root=out_dir,
    )


def load_cache(cache_dir) -> RcmCache:
    """Load and re-validate a cache directory written by build_cache."""
    cache_dir = Path(cache_dir)
    manifest_path = cache_dir / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ManifestMissingError(str(manifest_path))
    try:
        manifest = json.loads(manifest_path.read_text())
        raw_entries = manifest["entries"]
        intr = CameraIntrinsics.from_dict(manifest["intrinsics"])
        aabb = Aabb.from_dict(manifest["aabb"])
        fingerprint = manifest["mesh_fingerprint"]
        background = tuple(int(c) for c in manifest["background"])
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ManifestCorruptError(f"{manifest_path}: {exc}") from None
    if not raw_entries:
        raise ManifestCorruptError(f"{manifest_path}: no entries")
    if [e.get("index") for e in raw_entries] != list(range(len(raw_entries))):
        raise ManifestCorruptError(f"{manifest_path}: entry indices not contiguous")

    entries = []
    for e in raw_entries:
        i = e["index"]
        rcm_path = cache_dir / e["rcm"]
        rgb_path = cache_dir / e["rgb"]
        for path, key in ((rcm_path, "rcm_sha256"), (rgb_path, "rgb_sha256")):
            if not path.is_file():
                raise ImageMissingError(f"entry {i}: {path.name} is missing")
            if _sha256(path) != e[key]:
                raise ManifestCorruptError(f"entry {i}: {path.name} hash mismatch")
        rcm = load_png_rgb(rcm_path)
        rgb = load_png_rgb(rgb_path)
        if rcm.shape != rgb.shape or rcm.shape[:2] != (intr.height, intr.width):
            raise ManifestCorruptError(f"entry {i}: image dimensions disagree")
        if not np.array_equal(_foreground(rcm, background), _foreground(rgb, background)):
            raise MaskMismatchError(f"entry {i}: RCM and RGB coverage masks differ")
        try:
            pose = Pose6DoF.from_dict(e["pose"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestCorruptError(f"entry {i}: bad pose: {exc}") from None
        entries.append(CacheEntry(i, pose, rcm_path, rgb_path))

    return RcmCache(
        entries=tuple(entries),
        intrinsics=intr,
        mesh_fingerprint=fingerprint,
        aabb=aabb,
        background=background,
        root=cache_dir,
    )
