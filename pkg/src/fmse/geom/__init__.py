"""Geometric assistive tools: rectification, projection, deskewing, and
hidden point removal."""

from .deskew import deskew_points, ego_state_at, undistort_cloud
from .distortion import (
    PixelMap,
    apply_map,
    denormalize,
    distort,
    normalize,
    rectification_map,
    undistort,
)
from .hpr import (
    AUTO_RADIUS_MULTIPLIER,
    HprResult,
    HullResult,
    convex_hull_3d,
    flip_points,
    hidden_point_removal,
)
from .projection import PROJECTED_DTYPE, colorize_depth, project_cloud, render_overlay

__all__ = [
    "AUTO_RADIUS_MULTIPLIER",
    "HprResult",
    "HullResult",
    "PROJECTED_DTYPE",
    "PixelMap",
    "apply_map",
    "colorize_depth",
    "convex_hull_3d",
    "denormalize",
    "deskew_points",
    "distort",
    "ego_state_at",
    "flip_points",
    "hidden_point_removal",
    "normalize",
    "project_cloud",
    "rectification_map",
    "render_overlay",
    "undistort",
    "undistort_cloud",
]
