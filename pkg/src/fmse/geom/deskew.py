"""Ego-motion compensation for LiDAR sweeps.

A point measured ``dt`` after the scan trigger was seen from a sensor pose
that had already moved.  Under a constant twist (v, w) over one sweep, the
point re-expressed in the trigger-time sensor frame is

    p' = R(w * dt) @ p + v * dt

with R the exact angle-axis rotation (no small-angle approximation).
"""

import numpy as np

from ..errors import OutOfRangeError
from ..model import EgoMotionState, PointCloud


def _rotate_angle_axis(points, axis, angles):
    """Rodrigues rotation of points[i] by angles[i] about a shared unit axis."""
    cos = np.cos(angles)[:, None]
    sin = np.sin(angles)[:, None]
    k = axis[None, :]
    cross = np.cross(np.broadcast_to(k, points.shape), points)
    dot = points @ axis
    return points * cos + cross * sin + k * (dot * (1.0 - cos[:, 0]))[:, None]


def deskew_points(points, dt_seconds, motion: EgoMotionState) -> np.ndarray:
    """The float64 kernel: p' = R(w*dt) @ p + v*dt for each point/offset pair."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    dt = np.asarray(dt_seconds, dtype=np.float64).reshape(-1)
    w = motion.angular_velocity
    speed = np.linalg.norm(w)
    if speed > 0.0:
        rotated = _rotate_angle_axis(pts, w / speed, speed * dt)
    else:
        rotated = pts
    return rotated + motion.linear_velocity[None, :] * dt[:, None]


def undistort_cloud(cloud: PointCloud, motion: EgoMotionState) -> PointCloud:
    """Carry every point forward to the trigger-time sensor pose; per-point
    dt, intensity, and channel are preserved.  Output coordinates are
    quantized back to the cloud's native float32; use :func:`deskew_points`
    when full float64 results are needed."""
    if len(cloud) == 0:
        return cloud
    moved = deskew_points(
        cloud.xyz(), cloud.points["dt"].astype(np.float64) * 1e-9, motion
    )
    out = cloud.points.copy()
    out["x"] = moved[:, 0].astype(np.float32)
    out["y"] = moved[:, 1].astype(np.float32)
    out["z"] = moved[:, 2].astype(np.float32)
    return PointCloud(cloud.sensor, cloud.frame_timestamp, out)


def ego_state_at(ins_records, timestamp: int) -> EgoMotionState:
    """Linearly interpolate velocity and angular rate at ``timestamp`` from a
    sorted INS series; the query must lie inside the covered interval."""
    if not ins_records:
        raise OutOfRangeError("empty INS series")
    times = [r.timestamp for r in ins_records]
    if not times[0] <= timestamp <= times[-1]:
        raise OutOfRangeError(
            f"timestamp {timestamp} outside INS coverage [{times[0]}, {times[-1]}]"
        )
    hi = int(np.searchsorted(np.asarray(times, dtype=np.int64), timestamp, side="left"))
    if times[min(hi, len(times) - 1)] == timestamp:
        r = ins_records[min(hi, len(times) - 1)]
        return EgoMotionState(r.velocity, r.angular_rate)
    lo = hi - 1
    a, b = ins_records[lo], ins_records[hi]
    f = (timestamp - a.timestamp) / (b.timestamp - a.timestamp)
    return EgoMotionState(
        a.velocity + (b.velocity - a.velocity) * f,
        a.angular_rate + (b.angular_rate - a.angular_rate) * f,
    )
