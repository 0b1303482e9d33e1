"""LiDAR-to-camera projection and depth colorization.

Points are carried into the camera frame by a rigid transform, dropped if at
or behind the image plane, pinhole-projected (optionally through the lens
distortion model), and bounds-filtered.  Depth colors run from yellow for
the nearest points through purple to black for the farthest.
"""

import numpy as np

from ..errors import EmptyInputError
from ..model import CameraImage, CameraIntrinsics, PointCloud, RigidTransform
from .distortion import distort

#: Result rows of :func:`project_cloud`.
PROJECTED_DTYPE = np.dtype(
    [
        ("u", "<f8"),
        ("v", "<f8"),
        ("depth", "<f8"),
        ("source_index", "<i8"),
    ]
)

_BEHIND_EPS = 1e-6  # meters; avoids the division blow-up at z -> 0

_YELLOW = np.array([255.0, 255.0, 0.0])
_PURPLE = np.array([128.0, 0.0, 128.0])
_BLACK = np.array([0.0, 0.0, 0.0])


def project_cloud(
    cloud: PointCloud,
    cam_from_lidar: RigidTransform,
    intrinsics: CameraIntrinsics,
    apply_distortion: bool = False,
) -> np.ndarray:
    """Project a cloud onto the image plane; returns a PROJECTED_DTYPE array.

    Each surviving row holds sub-pixel (u, v), the camera-frame depth (z),
    and the index of the source point in ``cloud``.
    """
    out = np.empty(0, dtype=PROJECTED_DTYPE)
    if len(cloud) == 0:
        return out
    pts = cam_from_lidar.apply(cloud.xyz())
    z = pts[:, 2]
    front = z > _BEHIND_EPS
    if not front.any():
        return out
    idx = np.nonzero(front)[0]
    pts = pts[front]
    z = z[front]
    xy = pts[:, :2] / z[:, None]
    if apply_distortion:
        xy = distort(intrinsics, xy)
    u = xy[:, 0] * intrinsics.fx + intrinsics.cx
    v = xy[:, 1] * intrinsics.fy + intrinsics.cy
    inside = (u >= 0) & (u < intrinsics.width) & (v >= 0) & (v < intrinsics.height)
    out = np.empty(int(inside.sum()), dtype=PROJECTED_DTYPE)
    out["u"] = u[inside]
    out["v"] = v[inside]
    out["depth"] = z[inside]
    out["source_index"] = idx[inside]
    return out


def colorize_depth(depths, bounds=None) -> np.ndarray:
    """(n, 3) uint8 colors: yellow -> purple -> black, piecewise linear.

    The color scale spans the 1st..99th depth percentiles unless explicit
    ``bounds=(low, high)`` are given; depths outside are clamped.  A
    degenerate (zero-width) range clamps low, i.e. everything is yellow.
    """
    depths = np.asarray(depths, dtype=np.float64)
    if depths.size == 0:
        raise EmptyInputError("no depths to colorize")
    if bounds is None:
        low, high = np.percentile(depths, [1.0, 99.0])
    else:
        low, high = float(bounds[0]), float(bounds[1])
    if high <= low:
        s = np.zeros_like(depths)
    else:
        s = np.clip((depths - low) / (high - low), 0.0, 1.0)
    first = s <= 0.5
    t = np.where(first, s / 0.5, (s - 0.5) / 0.5)[..., None]
    a = np.where(first[..., None], _YELLOW, _PURPLE)
    b = np.where(first[..., None], _PURPLE, _BLACK)
    return np.rint(a + (b - a) * t).astype(np.uint8)


def render_overlay(
    image: CameraImage, projected: np.ndarray, colors: np.ndarray, radius: int = 1
) -> np.ndarray:
    """Splat projected points over the image; returns an (h, w, 3) uint8 array.

    Distant points are drawn first so nearer ones paint over them.
    """
    base = image.to_array()
    if base.ndim == 2:
        canvas = np.repeat(base[:, :, None], 3, axis=2).copy()
    elif image.encoding.value == "BGR8":
        canvas = base[:, :, ::-1].copy()
    else:
        canvas = base.copy()
    order = np.argsort(-projected["depth"], kind="stable")
    us = np.rint(projected["u"][order]).astype(np.intp)
    vs = np.rint(projected["v"][order]).astype(np.intp)
    cs = colors[order]
    r = max(0, radius - 1)
    h, w = canvas.shape[:2]
    for u, v, c in zip(us, vs, cs):
        canvas[max(0, v - r):min(h, v + r + 1), max(0, u - r):min(w, u + r + 1)] = c
    return canvas
