"""Rigid 6-DoF transforms, pinhole cameras, pose trajectories, view sampling.

All types are immutable value objects and all functions are pure, so
everything here is safe to share across threads.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass

import numpy as np

# Points closer than this to the camera plane are treated as behind it.
Z_NEAR = 1e-6

_GOLDEN_CONJUGATE = (math.sqrt(5.0) - 1.0) / 2.0


class EmptyTrajectoryError(ValueError):
    pass


def _quat_normalize(q: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(q))
    if n == 0.0:
        raise ValueError("zero quaternion")
    q = q / n
    # Canonical sign: w >= 0, ties broken on the first nonzero component.
    for c in q:
        if c > 0.0:
            break
        if c < 0.0:
            q = -q
            break
    return q


def _quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def _quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _matrix_to_quat(m: np.ndarray) -> np.ndarray:
    t = float(np.trace(m))
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(m[i, i] - m[j, j] - m[k, k] + 1.0, 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    return _quat_normalize(q)


@dataclass(frozen=True)
class Pose6DoF:
    """Rigid transform: rotate by a unit quaternion (w, x, y, z), then translate."""

    rotation: np.ndarray  # (4,) quaternion, w first, canonicalized w >= 0
    translation: np.ndarray  # (3,)

    def __init__(self, rotation, translation):
        q = _quat_normalize(np.asarray(rotation, dtype=np.float64).reshape(4).copy())
        t = np.asarray(translation, dtype=np.float64).reshape(3).copy()
        q.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose6DoF":
        return cls(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @classmethod
    def from_axis_angle(cls, axis, angle_rad: float, translation=(0.0, 0.0, 0.0)) -> "Pose6DoF":
        axis = np.asarray(axis, dtype=np.float64)
        axis = axis / np.linalg.norm(axis)
        h = 0.5 * angle_rad
        q = np.concatenate(([math.cos(h)], math.sin(h) * axis))
        return cls(q, translation)

    @classmethod
    def from_matrix(cls, rotation_matrix: np.ndarray, translation) -> "Pose6DoF":
        return cls(_matrix_to_quat(np.asarray(rotation_matrix, dtype=np.float64)), translation)

    def matrix(self) -> np.ndarray:
        """3x3 rotation matrix."""
        return _quat_to_matrix(self.rotation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform a (3,) point or an (N, 3) array of points."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix().T + self.translation

    def compose(self, other: "Pose6DoF") -> "Pose6DoF":
        """self after other: (self.compose(other)).apply(x) == self.apply(other.apply(x))."""
        q = _quat_mul(self.rotation, other.rotation)
        t = self.apply(other.translation)
        return Pose6DoF(q, t)

    def inverse(self) -> "Pose6DoF":
        q_inv = self.rotation * np.array([1.0, -1.0, -1.0, -1.0])
        t_inv = -(_quat_to_matrix(q_inv) @ self.translation)
        return Pose6DoF(q_inv, t_inv)

    def to_dict(self) -> dict:
        w, x, y, z = self.rotation
        tx, ty, tz = self.translation
        return {"qw": w, "qx": x, "qy": y, "qz": z, "tx": tx, "ty": ty, "tz": tz}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose6DoF":
        return cls([d["qw"], d["qx"], d["qy"], d["qz"]], [d["tx"], d["ty"], d["tz"]])


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(d["fx"], d["fy"], d["cx"], d["cy"], int(d["width"]), int(d["height"]))


def project_point(intr: CameraIntrinsics, cam_pose: Pose6DoF, world_point) -> tuple | None:
    """Pinhole projection. Returns (pixel (2,), depth) or None when behind the camera."""
    p = cam_pose.apply(np.asarray(world_point, dtype=np.float64))
    z = float(p[2])
    if z <= Z_NEAR:
        return None
    pixel = np.array([intr.fx * p[0] / z + intr.cx, intr.fy * p[1] / z + intr.cy])
    return pixel, z


def project_points(
    intr: CameraIntrinsics, cam_pose: Pose6DoF, world_points: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized projection of (N, 3) points.

    Returns (pixels (N, 2), depths (N,), valid (N,) bool); pixels/depths are
    undefined where valid is False.
    """
    p = cam_pose.apply(np.asarray(world_points, dtype=np.float64).reshape(-1, 3))
    z = p[:, 2]
    valid = z > Z_NEAR
    zs = np.where(valid, z, 1.0)
    pixels = np.stack(
        [intr.fx * p[:, 0] / zs + intr.cx, intr.fy * p[:, 1] / zs + intr.cy], axis=1
    )
    return pixels, z, valid


def unproject_pixel(
    intr: CameraIntrinsics, cam_pose: Pose6DoF, pixel, depth: float
) -> np.ndarray:
    """Exact inverse of project_point for depth > 0."""
    if depth <= 0:
        raise ValueError("depth must be positive")
    u, v = float(pixel[0]), float(pixel[1])
    p_cam = np.array([(u - intr.cx) * depth / intr.fx, (v - intr.cy) * depth / intr.fy, depth])
    return cam_pose.inverse().apply(p_cam)


def unproject_pixels(
    intr: CameraIntrinsics, cam_pose: Pose6DoF, pixels: np.ndarray, depths: np.ndarray
) -> np.ndarray:
    """Vectorized inverse projection of (N, 2) pixels with (N,) depths."""
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    depths = np.asarray(depths, dtype=np.float64).reshape(-1)
    if np.any(depths <= 0):
        raise ValueError("depths must be positive")
    p_cam = np.stack(
        [
            (pixels[:, 0] - intr.cx) * depths / intr.fx,
            (pixels[:, 1] - intr.cy) * depths / intr.fy,
            depths,
        ],
        axis=1,
    )
    return cam_pose.inverse().apply(p_cam)


@dataclass(frozen=True)
class PoseTrajectory:
    keyframes: tuple  # ordered ((time, Pose6DoF), ...)
    fps: float

    def __init__(self, keyframes, fps: float):
        kf = tuple((float(t), p) for t, p in keyframes)
        times = [t for t, _ in kf]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("keyframe times must be strictly increasing")
        if fps <= 0:
            raise ValueError("fps must be positive")
        object.__setattr__(self, "keyframes", kf)
        object.__setattr__(self, "fps", float(fps))

    def to_dict(self) -> dict:
        return {
            "fps": self.fps,
            "keyframes": [{"t": t, "pose": p.to_dict()} for t, p in self.keyframes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PoseTrajectory":
        return cls(
            [(k["t"], Pose6DoF.from_dict(k["pose"])) for k in d["keyframes"]], d["fps"]
        )

    @classmethod
    def load(cls, path) -> "PoseTrajectory":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def slerp(q0: np.ndarray, q1: np.ndarray, u: float) -> np.ndarray:
    """Spherical linear interpolation along the shorter arc, endpoints exact."""
    if u <= 0.0:
        return q0.copy()
    if u >= 1.0:
        return q1.copy()
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    if dot > 0.9995:
        q = q0 + u * (q1 - q0)
        return q / np.linalg.norm(q)
    theta = math.acos(min(dot, 1.0))
    s = math.sin(theta)
    return (math.sin((1.0 - u) * theta) / s) * q0 + (math.sin(u * theta) / s) * q1


def interpolate_pose(traj: PoseTrajectory, t: float) -> Pose6DoF:
    """Pose at time t: slerp rotation / lerp translation, clamped to the keyframe range."""
    if not traj.keyframes:
        raise EmptyTrajectoryError("trajectory has no keyframes")
    times = [k[0] for k in traj.keyframes]
    if t <= times[0]:
        return traj.keyframes[0][1]
    if t >= times[-1]:
        return traj.keyframes[-1][1]
    hi = bisect.bisect_right(times, t)
    lo = hi - 1
    t0, p0 = traj.keyframes[lo]
    t1, p1 = traj.keyframes[hi]
    if t == t0:
        return p0
    u = (t - t0) / (t1 - t0)
    q = slerp(p0.rotation, p1.rotation, u)
    trans = (1.0 - u) * p0.translation + u * p1.translation
    return Pose6DoF(q, trans)


def look_at_pose(center, target, up=(0.0, 1.0, 0.0)) -> Pose6DoF:
    """World-to-camera pose for a camera at `center` gazing at `target`.

    Camera convention: +x right, +y down, +z forward. Falls back to
    up = (1, 0, 0) when the gaze direction is parallel to `up`.
    """
    center = np.asarray(center, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - center
    n = np.linalg.norm(forward)
    if n < 1e-12:
        raise ValueError("camera center coincides with the look-at target")
    forward = forward / n
    up = np.asarray(up, dtype=np.float64)
    right = np.cross(forward, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(forward, np.array([1.0, 0.0, 0.0]))
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward])
    return Pose6DoF.from_matrix(rot, -(rot @ center))


def sample_sphere_views(n: int, radius: float, look_at=(0.0, 0.0, 0.0)) -> list[Pose6DoF]:
    """n camera poses on a Fibonacci sphere lattice around `look_at`, gazing inward.

    Deterministic for fixed (n, radius, look_at); lattice index is the
    canonical ordering.
    """
    if n < 1:
        raise ValueError("need at least one view")
    if radius <= 0:
        raise ValueError("radius must be positive")
    look_at = np.asarray(look_at, dtype=np.float64)
    poses = []
    for k in range(n):
        theta = math.acos(1.0 - 2.0 * (k + 0.5) / n)
        phi = 2.0 * math.pi * k * _GOLDEN_CONJUGATE
        # Polar axis along +y so the (0,1,0) up fallback covers the poles.
        direction = np.array(
            [math.sin(theta) * math.cos(phi), math.cos(theta), math.sin(theta) * math.sin(phi)]
        )
        poses.append(look_at_pose(look_at + radius * direction, look_at))
    return poses
