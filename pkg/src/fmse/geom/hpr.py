"""Hidden point removal by spherical flipping + convex hull membership.

Each point p is reflected about a sphere of radius R centered on the
viewpoint c:

    p_hat = p + 2 * (R - ||p - c||) * (p - c) / ||p - c||

A point is visible from c exactly when its flipped image is a vertex of the
convex hull of {flipped points} union {c}.  R defaults to 100x the largest
viewpoint distance and is exposed because the best multiplier is
scene-dependent.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..errors import DegenerateGeometryError
from ..model import PointCloud

AUTO_RADIUS_MULTIPLIER = 100.0


@dataclass
class HullResult:
    """Hull vertex indices plus outward-oriented triangular facets."""

    vertices: np.ndarray  # sorted indices into the input
    facets: np.ndarray    # (m, 3) indices, counter-clockwise seen from outside


@dataclass
class HprResult:
    visible: np.ndarray   # sorted indices into the cloud
    radius: float
    degenerate: bool = False  # too few/flat points: everything kept visible


def convex_hull_3d(points) -> HullResult:
    """Quickhull of >= 4 points; raises DEGENERATE on flat/collinear input."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 4:
        raise DegenerateGeometryError("need at least 4 points in 3-space")
    try:
        hull = ConvexHull(pts)
    except QhullError as e:
        raise DegenerateGeometryError(f"degenerate input: {e}") from e
    facets = hull.simplices.copy()
    # Qhull's simplex vertex order does not always agree with its outward
    # normal; flip those that disagree so facets read counter-clockwise
    # from outside.
    normals = hull.equations[:, :3]
    a = pts[facets[:, 0]]
    cross = np.cross(pts[facets[:, 1]] - a, pts[facets[:, 2]] - a)
    wrong = np.einsum("ij,ij->i", cross, normals) < 0
    facets[wrong] = facets[wrong][:, [0, 2, 1]]
    return HullResult(vertices=np.sort(hull.vertices), facets=facets)


def flip_points(points, viewpoint, radius: float) -> np.ndarray:
    """Spherical flipping of ``points`` about ``viewpoint``."""
    pts = np.asarray(points, dtype=np.float64)
    rel = pts - viewpoint
    norms = np.linalg.norm(rel, axis=1, keepdims=True)
    if norms.min(initial=np.inf) <= 0.0:
        raise DegenerateGeometryError("a point coincides with the viewpoint")
    return pts + 2.0 * (radius - norms) * rel / norms


def hidden_point_removal(cloud, viewpoint, radius="auto") -> HprResult:
    """Visible-point filter.  ``cloud`` may be a PointCloud or an (n, 3)
    array; ``radius`` is the flipping-sphere radius or "auto".

    Flat configurations (fewer than 4 non-coplanar flipped points) still
    filter correctly: hull membership is evaluated in the affine span of the
    points, so e.g. two points along one ray keep only the nearer one.  Such
    results are flagged ``degenerate``; if even the reduced hull fails,
    everything is kept visible.
    """
    pts = cloud.xyz() if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    viewpoint = np.asarray(viewpoint, dtype=np.float64).reshape(3)
    n = len(pts)
    if n == 0:
        return HprResult(visible=np.empty(0, dtype=np.intp), radius=0.0)

    dists = np.linalg.norm(pts - viewpoint, axis=1)
    if dists.min() <= 0.0:
        raise DegenerateGeometryError("a point coincides with the viewpoint")
    r = AUTO_RADIUS_MULTIPLIER * float(dists.max()) if radius == "auto" else float(radius)

    flipped = flip_points(pts, viewpoint, r)
    work = np.vstack([flipped, viewpoint[None, :]])
    degenerate = False
    if len(work) >= 4:
        try:
            vertices = ConvexHull(work).vertices
        except QhullError:
            degenerate = True
            vertices = _reduced_hull_vertices(work)
    else:
        degenerate = True
        vertices = _reduced_hull_vertices(work)
    if vertices is None:
        return HprResult(visible=np.arange(n, dtype=np.intp), radius=r, degenerate=True)
    visible = np.sort(np.asarray([v for v in vertices if v < n], dtype=np.intp))
    return HprResult(visible=visible, radius=r, degenerate=degenerate)


def _reduced_hull_vertices(points):
    """Extreme-point indices of a flat point set, computed in its affine span
    (2D hull, 1D extremes, or a single coincident location).  None when even
    that fails."""
    center = points.mean(axis=0)
    rel = points - center
    _u, s, vt = np.linalg.svd(rel, full_matrices=False)
    scale = s[0] if s[0] > 0 else 1.0
    rank = int((s > 1e-9 * scale).sum())
    if rank >= 3 or rank == 0:
        # rank 3 means qhull failed for another reason; rank 0 is a single
        # repeated location.  Either way every point is as extreme as any.
        return None if rank >= 3 else np.arange(len(points))
    coords = rel @ vt[:rank].T
    if rank == 1:
        t = coords[:, 0]
        return np.unique(np.concatenate([np.flatnonzero(t == t.min()),
                                         np.flatnonzero(t == t.max())]))
    try:
        return ConvexHull(coords).vertices
    except QhullError:
        return None
