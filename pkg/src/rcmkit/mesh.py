"""Triangle meshes: OBJ loading, bounding boxes, relative-coordinate colors.

A mesh's relative coordinate color assigns each vertex the position of that
vertex inside the mesh's axis-aligned bounding box, normalized to [0,1]^3 and
quantized to 8 bits. Rendering these colors produces a relative coordinate
map (RCM) of the visible surface.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MeshError(Exception):
    pass


class ObjParseError(MeshError):
    """Malformed OBJ record; message carries the 1-based line number."""


class FaceIndexError(MeshError):
    pass


class TextureMissingError(MeshError):
    pass


class EmptyMeshError(MeshError):
    pass


@dataclass(frozen=True)
class Vertex:
    position: np.ndarray  # (3,)
    uv: np.ndarray | None = None  # (2,) in [0,1]^2
    rgb: tuple | None = None  # 8-bit per channel


@dataclass
class Mesh:
    """Triangle mesh with optional per-vertex UVs and a single diffuse texture.

    positions: (Nv, 3) float64; uvs: (Nv, 2) float64 or None;
    vertex_rgb: (Nv, 3) uint8 or None; triangles: (Nt, 3) int64;
    texture: (H, W, 3) uint8 or None. UVs and texture must be present
    together. Treated as immutable after construction.
    """

    positions: np.ndarray
    triangles: np.ndarray
    uvs: np.ndarray | None = None
    vertex_rgb: np.ndarray | None = None
    texture: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(self.positions)):
            raise MeshError("vertex positions must be finite")
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.positions)
        ):
            raise FaceIndexError("triangle index out of range")
        if self.uvs is not None:
            self.uvs = np.asarray(self.uvs, dtype=np.float64).reshape(-1, 2)
            if len(self.uvs) != len(self.positions):
                raise MeshError("uv count must match vertex count")
            if self.texture is None:
                raise TextureMissingError("mesh has UVs but no texture image")
        elif self.texture is not None:
            raise MeshError("texture supplied but mesh has no UVs")
        if self.vertex_rgb is not None:
            self.vertex_rgb = np.asarray(self.vertex_rgb, dtype=np.uint8).reshape(-1, 3)
            if len(self.vertex_rgb) != len(self.positions):
                raise MeshError("vertex color count must match vertex count")
        if self.texture is not None:
            self.texture = np.asarray(self.texture, dtype=np.uint8)
            if self.texture.ndim != 3 or self.texture.shape[2] != 3:
                raise MeshError("texture must be an 8-bit RGB image")

    @property
    def n_vertices(self) -> int:
        return len(self.positions)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def vertex(self, i: int) -> Vertex:
        return Vertex(
            position=self.positions[i],
            uv=None if self.uvs is None else self.uvs[i],
            rgb=None if self.vertex_rgb is None else tuple(int(c) for c in self.vertex_rgb[i]),
        )

    def fingerprint(self) -> str:
        """SHA-256 over geometry, UVs, connectivity, and texture bytes."""
        h = hashlib.sha256()
        h.update(self.positions.tobytes())
        h.update(self.triangles.tobytes())
        h.update(self.uvs.tobytes() if self.uvs is not None else b"nouv")
        h.update(self.vertex_rgb.tobytes() if self.vertex_rgb is not None else b"norgb")
        h.update(self.texture.tobytes() if self.texture is not None else b"notex")
        return h.hexdigest()


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box with strictly positive extent on every axis."""

    b_min: np.ndarray
    b_max: np.ndarray

    def __init__(self, b_min, b_max):
        b_min = np.asarray(b_min, dtype=np.float64).reshape(3).copy()
        b_max = np.asarray(b_max, dtype=np.float64).reshape(3).copy()
        if np.any(b_min > b_max):
            raise ValueError("b_min must not exceed b_max")
        b_min.setflags(write=False)
        b_max.setflags(write=False)
        object.__setattr__(self, "b_min", b_min)
        object.__setattr__(self, "b_max", b_max)

    @property
    def extent(self) -> np.ndarray:
        return self.b_max - self.b_min

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.b_min + self.b_max)

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extent))

    def to_dict(self) -> dict:
        return {"b_min": list(self.b_min), "b_max": list(self.b_max)}

    @classmethod
    def from_dict(cls, d: dict) -> "Aabb":
        return cls(d["b_min"], d["b_max"])


@dataclass(frozen=True)
class RcmColor:
    normalized: np.ndarray  # (3,) in [0,1]^3
    quantized: tuple  # 8-bit per channel


class RcmColors:
    """Per-vertex relative-coordinate colors, stored as arrays.

    normalized: (N, 3) float64 in [0,1]; quantized: (N, 3) uint8 with
    quantized = floor(255 * normalized) clamped to [0, 255].
    """

    def __init__(self, normalized: np.ndarray, quantized: np.ndarray):
        self.normalized = np.asarray(normalized, dtype=np.float64).reshape(-1, 3)
        self.quantized = np.asarray(quantized, dtype=np.uint8).reshape(-1, 3)
        if len(self.normalized) != len(self.quantized):
            raise ValueError("normalized/quantized length mismatch")

    def __len__(self) -> int:
        return len(self.normalized)

    def __getitem__(self, i: int) -> RcmColor:
        return RcmColor(self.normalized[i], tuple(int(c) for c in self.quantized[i]))


def compute_aabb(mesh: Mesh, eps_scale: float = 1e-9) -> Aabb:
    """Component-wise min/max corners, with near-degenerate axes expanded.

    Any axis whose extent falls below eps = eps_scale * max(extent) (or
    eps_scale itself when the mesh collapses to a point) is symmetrically
    widened to eps so normalization never divides by zero.
    """
    if mesh.n_vertices == 0:
        raise EmptyMeshError("cannot bound an empty mesh")
    b_min = mesh.positions.min(axis=0)
    b_max = mesh.positions.max(axis=0)
    extent = b_max - b_min
    eps = eps_scale * (extent.max() if extent.max() > 0 else 1.0)
    thin = extent < eps
    b_min = np.where(thin, b_min - 0.5 * (eps - extent), b_min)
    b_max = np.where(thin, b_max + 0.5 * (eps - extent), b_max)
    return Aabb(b_min, b_max)


def compute_rcm_colors(mesh: Mesh, aabb: Aabb) -> RcmColors:
    """Normalize each vertex into the box ([0,1]^3) and quantize to 8 bits."""
    extent = aabb.extent
    if np.any(extent <= 0):
        raise ValueError("bounding box has a zero-extent axis")
    normalized = np.clip((mesh.positions - aabb.b_min) / extent, 0.0, 1.0)
    quantized = np.clip(np.floor(255.0 * normalized), 0, 255).astype(np.uint8)
    return RcmColors(normalized, quantized)


def denormalize_rcm(aabb: Aabb, normalized: np.ndarray) -> np.ndarray:
    """Map [0,1]^3 coordinates back to model-space positions."""
    return aabb.b_min + np.asarray(normalized, dtype=np.float64) * aabb.extent


def sample_texture(mesh: Mesh, uv) -> tuple:
    """Bilinear texture sample at uv with repeat wrapping, round-half-up."""
    if mesh.texture is None:
        raise TextureMissingError("mesh has no texture")
    rgb = sample_texture_many(mesh.texture, np.asarray(uv, dtype=np.float64).reshape(1, 2))[0]
    return tuple(int(c) for c in rgb)


def sample_texture_many(texture: np.ndarray, uvs: np.ndarray) -> np.ndarray:
    """Vectorized bilinear sampling of (N, 2) uvs; returns (N, 3) uint8.

    Texel (i, j) is centered at uv = ((i+0.5)/W, (j+0.5)/H), with j counting
    rows from the top of the image; coordinates wrap (repeat mode).
    """
    h, w = texture.shape[:2]
    uvs = np.asarray(uvs, dtype=np.float64).reshape(-1, 2)
    x = uvs[:, 0] * w - 0.5
    y = uvs[:, 1] * h - 0.5
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    x0w, x1w = x0 % w, (x0 + 1) % w
    y0w, y1w = y0 % h, (y0 + 1) % h
    tex = texture.astype(np.float64)
    c = (
        tex[y0w, x0w] * ((1 - fx) * (1 - fy))[:, None]
        + tex[y0w, x1w] * (fx * (1 - fy))[:, None]
        + tex[y1w, x0w] * ((1 - fx) * fy)[:, None]
        + tex[y1w, x1w] * (fx * fy)[:, None]
    )
    return np.clip(np.floor(c + 0.5), 0, 255).astype(np.uint8)


def _parse_index(token: str, count: int, lineno: int) -> int:
    try:
        idx = int(token)
    except ValueError:
        raise ObjParseError(f"line {lineno}: bad index {token!r}") from None
    if idx > 0:
        resolved = idx - 1
    elif idx < 0:
        resolved = count + idx
    else:
        raise ObjParseError(f"line {lineno}: OBJ indices are 1-based, got 0")
    if resolved < 0 or resolved >= count:
        raise FaceIndexError(f"line {lineno}: index {idx} out of range (have {count})")
    return resolved


def load_mesh(path, texture_path=None) -> Mesh:
    """Load a Wavefront OBJ file (v / vt / f records; vn parsed and dropped).

    Polygonal faces are fan-triangulated. Face corners sharing a position but
    differing in UV are split into distinct vertices; (position, uv) pairs
    are de-duplicated. A texture must accompany any mesh that uses UVs.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    texture = None
    if texture_path is not None:
        from .images import load_png_rgb

        texture = load_png_rgb(texture_path)

    raw_positions: list = []
    raw_uvs: list = []
    corners: dict = {}  # (pos_idx, uv_idx) -> packed vertex index
    positions: list = []
    uvs: list = []
    triangles: list = []
    any_uv = False

    def corner_index(pos_idx: int, uv_idx: int | None) -> int:
        key = (pos_idx, uv_idx)
        if key not in corners:
            corners[key] = len(positions)
            positions.append(raw_positions[pos_idx])
            uvs.append(raw_uvs[uv_idx] if uv_idx is not None else (0.0, 0.0))
        return corners[key]

    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            tag, args = parts[0], parts[1:]
            if tag == "v":
                if len(args) < 3:
                    raise ObjParseError(f"line {lineno}: vertex needs 3 coordinates")
                try:
                    raw_positions.append(tuple(float(a) for a in args[:3]))
                except ValueError:
                    raise ObjParseError(f"line {lineno}: bad vertex coordinate") from None
            elif tag == "vt":
                if len(args) < 2:
                    raise ObjParseError(f"line {lineno}: uv needs 2 coordinates")
                try:
                    u, v = float(args[0]), float(args[1])
                except ValueError:
                    raise ObjParseError(f"line {lineno}: bad uv coordinate") from None
                raw_uvs.append((u % 1.0 if u not in (0.0, 1.0) else u, v % 1.0 if v not in (0.0, 1.0) else v))
            elif tag == "f":
                if len(args) < 3:
                    raise ObjParseError(f"line {lineno}: face needs at least 3 corners")
                face = []
                for corner in args:
                    fields = corner.split("/")
                    pos_idx = _parse_index(fields[0], len(raw_positions), lineno)
                    uv_idx = None
                    if len(fields) > 1 and fields[1]:
                        uv_idx = _parse_index(fields[1], len(raw_uvs), lineno)
                        any_uv = True
                    face.append(corner_index(pos_idx, uv_idx))
                for k in range(1, len(face) - 1):
                    triangles.append((face[0], face[k], face[k + 1]))
            elif tag in ("vn", "mtllib", "usemtl", "o", "g", "s", "l", "p"):
                continue
            else:
                raise ObjParseError(f"line {lineno}: unsupported record {tag!r}")

    if not triangles:
        raise EmptyMeshError(f"{path}: no faces found")
    if any_uv and texture is None:
        raise TextureMissingError(f"{path}: mesh uses UVs but no texture was supplied")
    if not any_uv and texture is not None:
        raise MeshError(f"{path}: texture supplied but mesh has no UVs")
    return Mesh(
        positions=np.array(positions, dtype=np.float64),
        triangles=np.array(triangles, dtype=np.int64),
        uvs=np.array(uvs, dtype=np.float64) if any_uv else None,
        texture=texture,
    )


def save_mesh(mesh: Mesh, path) -> None:
    """Write the supported OBJ subset (v / vt / f) back to disk."""
    lines = []
    for p in mesh.positions:
        lines.append(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}")
    has_uv = mesh.uvs is not None
    if has_uv:
        for uv in mesh.uvs:
            lines.append(f"vt {uv[0]:.9g} {uv[1]:.9g}")
    for tri in mesh.triangles:
        if has_uv:
            lines.append("f " + " ".join(f"{i + 1}/{i + 1}" for i in tri))
        else:
            lines.append("f " + " ".join(str(i + 1) for i in tri))
    Path(path).write_text("\n".join(lines) + "\n")
