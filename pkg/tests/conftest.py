import numpy as np
import pytest

from rcmkit.geometry import CameraIntrinsics, Pose6DoF
from rcmkit.mesh import Mesh


def unit_cube(offset=(0.0, 0.0, 0.0), scale=1.0) -> Mesh:
    """Plain 12-triangle cube spanning [0, scale]^3 + offset, no texture."""
    v = np.array(
        [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=np.float64
    )
    v = v * scale + np.asarray(offset, dtype=np.float64)
    faces = []

    def quad(a, b, c, d):
        faces.extend([(a, b, c), (a, c, d)])

    quad(0, 1, 3, 2)
    quad(4, 6, 7, 5)
    quad(0, 4, 5, 1)
    quad(2, 3, 7, 6)
    quad(0, 2, 6, 4)
    quad(1, 5, 7, 3)
    return Mesh(positions=v, triangles=np.array(faces, dtype=np.int64))


def checkerboard_texture(size=64, cell=8, colors=((220, 60, 40), (40, 90, 220))) -> np.ndarray:
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    board = ((yy // cell + xx // cell) % 2).astype(bool)
    tex = np.where(board[:, :, None], np.array(colors[0], np.uint8), np.array(colors[1], np.uint8))
    return tex.astype(np.uint8)


def textured_cube(subdiv=6, texture=None) -> Mesh:
    """Unit cube with each face split into subdiv^2 quads and full-face UVs."""
    if texture is None:
        texture = checkerboard_texture()
    positions, uvs, tris = [], [], []
    # face = (origin, u-axis, v-axis)
    faces = [
        ((0, 0, 0), (1, 0, 0), (0, 1, 0)),  # z = 0
        ((0, 0, 1), (1, 0, 0), (0, 1, 0)),  # z = 1
        ((0, 0, 0), (1, 0, 0), (0, 0, 1)),  # y = 0
        ((0, 1, 0), (1, 0, 0), (0, 0, 1)),  # y = 1
        ((0, 0, 0), (0, 1, 0), (0, 0, 1)),  # x = 0
        ((1, 0, 0), (0, 1, 0), (0, 0, 1)),  # x = 1
    ]
    for origin, ua, va in faces:
        base = len(positions)
        origin, ua, va = map(np.asarray, (origin, ua, va))
        n = subdiv + 1
        for j in range(n):
            for i in range(n):
                u, w = i / subdiv, j / subdiv
                positions.append(origin + u * ua + w * va)
                uvs.append((u, w))
        for j in range(subdiv):
            for i in range(subdiv):
                a = base + j * n + i
                b, c, d = a + 1, a + n + 1, a + n
                tris.extend([(a, b, c), (a, c, d)])
    return Mesh(
        positions=np.array(positions, dtype=np.float64),
        triangles=np.array(tris, dtype=np.int64),
        uvs=np.array(uvs, dtype=np.float64),
        texture=texture,
    )


def random_mesh(rng, n_vertices=12, n_triangles=10, scale=1.0) -> Mesh:
    positions = rng.uniform(0.0, scale, size=(n_vertices, 3))
    triangles = []
    while len(triangles) < n_triangles:
        tri = rng.choice(n_vertices, size=3, replace=False)
        triangles.append(tuple(tri))
    return Mesh(positions=positions, triangles=np.array(triangles, dtype=np.int64))


def frontal_camera(width=256, height=256, f=300.0) -> CameraIntrinsics:
    return CameraIntrinsics(fx=f, fy=f, cx=width / 2.0, cy=height / 2.0,
                            width=width, height=height)


def center_object_pose(mesh: Mesh, distance=2.5) -> Pose6DoF:
    """Object pose that puts the mesh's AABB center on the optical axis."""
    center = 0.5 * (mesh.positions.min(axis=0) + mesh.positions.max(axis=0))
    return Pose6DoF(np.array([1.0, 0.0, 0.0, 0.0]), np.array([0.0, 0.0, distance]) - center)


def ray_cast_depth(cam_verts: np.ndarray, triangles: np.ndarray,
                   intr: CameraIntrinsics, px: float, py: float) -> float:
    """Nearest-hit ray/triangle intersection through a pixel center.

    Moller-Trumbore over every triangle in camera space; returns the
    camera-space z of the closest hit or +inf. Independent oracle for the
    rasterizer's depth buffer.
    """
    d = np.array([(px - intr.cx) / intr.fx, (py - intr.cy) / intr.fy, 1.0])
    v0 = cam_verts[triangles[:, 0]]
    e1 = cam_verts[triangles[:, 1]] - v0
    e2 = cam_verts[triangles[:, 2]] - v0
    pvec = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > 1e-12
    inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = -v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
    qvec = np.cross(tvec, e1)
    v = np.einsum("ij,ij->i", np.broadcast_to(d, e1.shape), qvec) * inv_det
    t = np.einsum("ij,ij->i", e2, qvec) * inv_det
    hit = ok & (u >= -1e-9) & (v >= -1e-9) & (u + v <= 1 + 1e-9) & (t > 1e-6)
    return float(t[hit].min()) if hit.any() else float("inf")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
