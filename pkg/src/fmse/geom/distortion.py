"""Lens distortion, undistortion, and rectification remapping.

Normalized coordinates are (x, y) = ((u - cx)/fx, (v - cy)/fy).  The forward
model is Brown-Conrady with coefficients (k1, k2, p1, p2, k3):

    r^2  = x^2 + y^2
    x_d  = x*(1 + k1 r^2 + k2 r^4 + k3 r^6) + 2 p1 x y + p2 (r^2 + 2 x^2)
    y_d  = y*(1 + k1 r^2 + k2 r^4 + k3 r^6) + p1 (r^2 + 2 y^2) + 2 p2 x y

Inversion is a fixed-point iteration, reliable for |k1| <= 0.5 and the
moderate higher-order coefficients real lenses produce.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatchError, NoConvergenceError
from ..model import CameraImage, CameraIntrinsics


def distort(intrinsics: CameraIntrinsics, xy):
    """Apply the forward distortion model to normalized points (shape (...,2))."""
    xy = np.asarray(xy, dtype=np.float64)
    x, y = xy[..., 0], xy[..., 1]
    k1, k2, p1, p2, k3 = intrinsics.distortion
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
    yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
    return np.stack([xd, yd], axis=-1)


def undistort(intrinsics: CameraIntrinsics, xy, tol: float = 1e-10,
              max_iter: int = 20, residual_tol: float = 1e-8):
    """Invert :func:`distort` for normalized points.

    Newton-accelerated fixed-point iteration (2x2 Jacobian per point; plain
    Picard steps contract too slowly near |k1| = 0.5), stopping at a step
    below ``tol`` or after ``max_iter`` rounds.  The result is verified
    through the forward model; NO_CONVERGENCE is raised if any round-trip
    residual exceeds ``residual_tol``.
    """
    xy = np.asarray(xy, dtype=np.float64)
    k1, k2, p1, p2, k3 = intrinsics.distortion
    x, y = xy[..., 0].copy(), xy[..., 1].copy()
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            r2 = x * x + y * y
            radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
            g = k1 + r2 * (2.0 * k2 + 3.0 * k3 * r2)
            fx_err = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x) - xy[..., 0]
            fy_err = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y - xy[..., 1]
            j00 = radial + 2.0 * x * x * g + 2.0 * p1 * y + 6.0 * p2 * x
            j01 = 2.0 * x * y * g + 2.0 * p1 * x + 2.0 * p2 * y
            j10 = 2.0 * x * y * g + 2.0 * p1 * x + 2.0 * p2 * y
            j11 = radial + 2.0 * y * y * g + 6.0 * p1 * y + 2.0 * p2 * x
            det = j00 * j11 - j01 * j10
            dx = (j11 * fx_err - j01 * fy_err) / det
            dy = (j00 * fy_err - j10 * fx_err) / det
            ok = np.isfinite(dx) & np.isfinite(dy)
            dx = np.where(ok, dx, 0.0)
            dy = np.where(ok, dy, 0.0)
            x -= dx
            y -= dy
            step = max(np.abs(dx).max(initial=0.0), np.abs(dy).max(initial=0.0))
            if step < tol:
                break
    out = np.stack([x, y], axis=-1)
    residual = np.abs(distort(intrinsics, out) - xy).max(initial=0.0)
    if not np.isfinite(residual) or residual > residual_tol:
        raise NoConvergenceError(
            f"undistortion residual {residual:.3g} exceeds {residual_tol:g}"
        )
    return out


def normalize(intrinsics: CameraIntrinsics, uv):
    uv = np.asarray(uv, dtype=np.float64)
    x = (uv[..., 0] - intrinsics.cx) / intrinsics.fx
    y = (uv[..., 1] - intrinsics.cy) / intrinsics.fy
    return np.stack([x, y], axis=-1)


def denormalize(intrinsics: CameraIntrinsics, xy):
    xy = np.asarray(xy, dtype=np.float64)
    u = xy[..., 0] * intrinsics.fx + intrinsics.cx
    v = xy[..., 1] * intrinsics.fy + intrinsics.cy
    return np.stack([u, v], axis=-1)


@dataclass
class PixelMap:
    """Per-destination-pixel source lookup coordinates (sub-pixel floats).

    NaN marks destinations with no source ray (behind the rectifying
    rotation); coordinates outside the source image simply fall out of
    bounds at sampling time.
    """

    width: int
    height: int
    map_x: np.ndarray  # (height, width) float64
    map_y: np.ndarray


def rectification_map(
    src: CameraIntrinsics, dst: CameraIntrinsics, rotation=None
) -> PixelMap:
    """Build the undistort-rectify lookup: for each destination pixel,
    unproject with ``dst``, rotate by ``rotation``^T, re-distort with
    ``src``'s coefficients, project with ``src``."""
    if rotation is None:
        rotation = np.eye(3)
    else:
        rotation = np.asarray(rotation, dtype=np.float64)

    us, vs = np.meshgrid(
        np.arange(dst.width, dtype=np.float64),
        np.arange(dst.height, dtype=np.float64),
    )
    xy = normalize(dst, np.stack([us, vs], axis=-1))
    rays = np.concatenate([xy, np.ones_like(xy[..., :1])], axis=-1)
    rays = rays @ rotation  # == (rotation.T @ ray) per pixel
    z = rays[..., 2]
    valid = z > 1e-12
    with np.errstate(invalid="ignore", divide="ignore"):
        xn = np.where(valid, rays[..., 0] / z, np.nan)
        yn = np.where(valid, rays[..., 1] / z, np.nan)
    distorted = distort(src, np.stack([xn, yn], axis=-1))
    uv = denormalize(src, distorted)
    return PixelMap(
        width=dst.width, height=dst.height, map_x=uv[..., 0], map_y=uv[..., 1]
    )


def apply_map(image: CameraImage, pixel_map: PixelMap) -> CameraImage:
    """Bilinearly resample ``image`` at the map's source coordinates.

    Destination pixels whose lookup falls outside the source image (or is
    NaN) become 0.  Sampling never reads outside the source buffer: corner
    indices are formed only inside [0, w-1] x [0, h-1].
    """
    if (image.width, image.height) != (pixel_map.width, pixel_map.height):
        raise DimensionMismatchError(
            f"image is {image.width}x{image.height}, "
            f"map expects {pixel_map.width}x{pixel_map.height}"
        )
    src = image.to_array().astype(np.float64)
    if src.ndim == 2:
        src = src[..., None]
    h, w = image.height, image.width

    x = pixel_map.map_x
    y = pixel_map.map_y
    inside = (
        np.isfinite(x) & np.isfinite(y)
        & (x >= 0.0) & (x <= w - 1.0) & (y >= 0.0) & (y <= h - 1.0)
    )
    xs = np.where(inside, x, 0.0)
    ys = np.where(inside, y, 0.0)
    # Clip the base corner to w-2/h-2 so x1/y1 stay in bounds; the weights
    # shift accordingly and edge coordinates still sample exactly.
    x0 = np.clip(np.floor(xs), 0, max(w - 2, 0)).astype(np.intp)
    y0 = np.clip(np.floor(ys), 0, max(h - 2, 0)).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]

    out = (
        src[y0, x0] * (1 - fx) * (1 - fy)
        + src[y0, x1] * fx * (1 - fy)
        + src[y1, x0] * (1 - fx) * fy
        + src[y1, x1] * fx * fy
    )
    out = np.where(inside[..., None], out, 0.0)
    pixels = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    if image.encoding.channels == 1:
        pixels = pixels[..., 0]
    return CameraImage(
        sensor=image.sensor,
        timestamp=image.timestamp,
        width=image.width,
        height=image.height,
        encoding=image.encoding,
        pixels=pixels.tobytes(),
        exposure_us=image.exposure_us,
    )
