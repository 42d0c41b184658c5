"""Relative-coordinate-map rendering and geometry-consistency evaluation."""

from .cache import RcmCache, build_cache, load_cache
from .consistency import (
    ConsistencyReport,
    PointCloud,
    PointMap,
    aggregate,
    compute_tssim,
    mask_iou,
    oracle_pointmaps,
    reproject,
    ssim,
)
from .geometry import (
    CameraIntrinsics,
    Pose6DoF,
    PoseTrajectory,
    interpolate_pose,
    project_point,
    sample_sphere_views,
    unproject_pixel,
)
from .mesh import (
    Aabb,
    Mesh,
    RcmColor,
    RcmColors,
    compute_aabb,
    compute_rcm_colors,
    load_mesh,
    sample_texture,
    save_mesh,
)
from .raster import FrameBuffers, rasterize, render_sequence

__all__ = [
    "Aabb",
    "CameraIntrinsics",
    "ConsistencyReport",
    "FrameBuffers",
    "Mesh",
    "PointCloud",
    "PointMap",
    "Pose6DoF",
    "PoseTrajectory",
    "RcmCache",
    "RcmColor",
    "RcmColors",
    "aggregate",
    "build_cache",
    "compute_aabb",
    "compute_rcm_colors",
    "compute_tssim",
    "interpolate_pose",
    "load_cache",
    "load_mesh",
    "mask_iou",
    "oracle_pointmaps",
    "project_point",
    "rasterize",
    "render_sequence",
    "reproject",
    "sample_sphere_views",
    "sample_texture",
    "save_mesh",
    "ssim",
    "unproject_pixel",
]
