"""Domain types shared by every other module: sensors, records, frames,
dataset metadata, and SE(3) rigid transforms.

Conventions:
  * timestamps are unsigned 64-bit nanoseconds since the Unix epoch, UTC
  * angles are radians internally; degrees appear only at CLI/file boundaries
  * rotations are stored as 3x3 matrices; unit quaternions (x, y, z, w) are
    accepted and produced at I/O boundaries
  * INS orientation quaternions are body-to-world
All types are immutable values after construction and safe to share across
threads; the operations on them are pure functions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class Agent(enum.Enum):
    VEHICLE = "VEHICLE"
    TOWER = "TOWER"


class Modality(enum.Enum):
    CAMERA = "CAMERA"
    LIDAR = "LIDAR"
    INS = "INS"
    GNSS = "GNSS"


class Encoding(enum.Enum):
    RGB8 = "RGB8"
    BGR8 = "BGR8"
    MONO8 = "MONO8"

    @property
    def channels(self):
        return 1 if self is Encoding.MONO8 else 3


#: Per-agent root sensor: every calibration entry is expressed sensor-to-root.
ROOT_SENSOR_NAME = {Agent.VEHICLE: "LIDAR_TOP", Agent.TOWER: "TOWER_LIDAR_TOP"}

#: One 10 Hz frame period in nanoseconds; per-point time offsets live in [0, this).
FRAME_PERIOD_NS = 100_000_000


def _freeze(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SensorId:
    """Identity of one physical sensor: (agent, name) is unique per registry."""

    agent: Agent
    name: str
    modality: Modality

    def __str__(self):
        return f"{self.agent.value}/{self.name}"


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) element: ``p_out = rotation @ p_in + translation``.

    The rotation block must be orthonormal with determinant +1 (both within
    1e-9).  Construction re-orthonormalizes via polar decomposition whenever
    the drift ``max|R^T R - I|`` exceeds 1e-12, so long composition chains
    stay on the manifold.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if not (np.isfinite(r).all() and np.isfinite(t).all()):
            raise ValueError("non-finite rigid transform")
        drift = np.abs(r.T @ r - np.eye(3)).max()
        if drift > 1e-6:
            # far beyond numerical drift: corrupt input, not accumulated error
            raise ValueError("rotation is not a proper orthonormal matrix")
        if drift > 1e-12:
            r = _orthonormalize(r)
            drift = np.abs(r.T @ r - np.eye(3)).max()
        if drift > 1e-9 or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation is not a proper orthonormal matrix")
        object.__setattr__(self, "rotation", _freeze(r))
        object.__setattr__(self, "translation", _freeze(t))

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_matrix(m) -> "RigidTransform":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4) or np.abs(m[3] - [0, 0, 0, 1]).max() > 1e-9:
            raise ValueError("expected a homogeneous 4x4 matrix")
        return RigidTransform(m[:3, :3], m[:3, 3])

    @staticmethod
    def from_quaternion(xyzw, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return RigidTransform(quaternion_to_matrix(xyzw), translation)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def quaternion(self) -> np.ndarray:
        """Rotation as a unit quaternion (x, y, z, w), w >= 0."""
        return matrix_to_quaternion(self.rotation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self`` applied after ``other`` (4x4 product self @ other)."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def invert(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        """Transform one (3,) point or an (n, 3) batch."""
        p = np.asarray(points, dtype=np.float64)
        if p.ndim == 1:
            return self.rotation @ p + self.translation
        return p @ self.rotation.T + self.translation

    def approx_equal(self, other: "RigidTransform", tol: float = 1e-9) -> bool:
        return (
            np.abs(self.rotation - other.rotation).max() <= tol
            and np.abs(self.translation - other.translation).max() <= tol
        )


def _orthonormalize(r):
    # Polar factor via Newton iteration X <- (X + X^-T)/2; quadratic
    # convergence for near-orthonormal input.
    x = r
    for _ in range(20):
        nxt = 0.5 * (x + np.linalg.inv(x).T)
        if np.abs(nxt - x).max() < 1e-15:
            x = nxt
            break
        x = nxt
    return x


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    return a.compose(b)


def invert(t: RigidTransform) -> RigidTransform:
    return t.invert()


def apply(t: RigidTransform, p) -> np.ndarray:
    return t.apply(p)


def quaternion_to_matrix(xyzw) -> np.ndarray:
    q = np.asarray(xyzw, dtype=np.float64).reshape(4)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n < 1e-12:
        raise ValueError("quaternion has (near-)zero norm")
    x, y, z, w = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quaternion(r) -> np.ndarray:
    """Unit quaternion (x, y, z, w) with w >= 0 for a rotation matrix."""
    r = np.asarray(r, dtype=np.float64)
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        w = 0.25 * s
        x = (r[2, 1] - r[1, 2]) / s
        y = (r[0, 2] - r[2, 0]) / s
        z = (r[1, 0] - r[0, 1]) / s
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2
        w = (r[2, 1] - r[1, 2]) / s
        x = 0.25 * s
        y = (r[0, 1] + r[1, 0]) / s
        z = (r[0, 2] + r[2, 0]) / s
    elif r[1, 1] >= r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2
        w = (r[0, 2] - r[2, 0]) / s
        x = (r[0, 1] + r[1, 0]) / s
        y = 0.25 * s
        z = (r[1, 2] + r[2, 1]) / s
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2
        w = (r[1, 0] - r[0, 1]) / s
        x = (r[0, 2] + r[2, 0]) / s
        y = (r[1, 2] + r[2, 1]) / s
        z = 0.25 * s
    q = np.array([x, y, z, w])
    q /= np.linalg.norm(q)
    if q[3] < 0:
        q = -q
    return q


@dataclass(frozen=True)
class SensorSpec:
    """Registry entry describing one sensor (resolution, rate, field of view)."""

    id: SensorId
    resolution: tuple  # (width px, height px) or (azimuth bins, channels)
    frequency: float   # Hz
    hfov: float        # degrees, (0, 360]
    vfov: float        # degrees, (0, 180]
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        if not 0 < self.hfov <= 360:
            raise ValueError("hfov out of (0, 360]")
        if not 0 < self.vfov <= 180:
            raise ValueError("vfov out of (0, 180]")
        object.__setattr__(self, "resolution", tuple(int(v) for v in self.resolution))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole model with 5-coefficient radial-tangential (Brown-Conrady)
    distortion (k1, k2, p1, p2, k3)."""

    fx: float
    fy: float
    cx: float
    cy: float
    distortion: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")
        d = np.asarray(self.distortion, dtype=np.float64).reshape(5)
        object.__setattr__(self, "distortion", _freeze(d))

    def horizontal_fov(self) -> float:
        """Horizontal field of view in degrees: 2*atan(width / (2*fx))."""
        return math.degrees(2.0 * math.atan(self.width / (2.0 * self.fx)))

    def vertical_fov(self) -> float:
        return math.degrees(2.0 * math.atan(self.height / (2.0 * self.fy)))


def horizontal_fov(intrinsics: CameraIntrinsics) -> float:
    return intrinsics.horizontal_fov()


@dataclass(frozen=True)
class CameraImage:
    sensor: SensorId
    timestamp: int  # ns UTC
    width: int
    height: int
    encoding: Encoding
    pixels: bytes
    exposure_us: int = 0

    def __post_init__(self):
        expected = self.width * self.height * self.encoding.channels
        if len(self.pixels) != expected:
            raise ValueError(
                f"pixel buffer has {len(self.pixels)} bytes, expected {expected}"
            )

    def to_array(self) -> np.ndarray:
        """(height, width) for MONO8, (height, width, 3) otherwise. Read-only view."""
        a = np.frombuffer(self.pixels, dtype=np.uint8)
        shape = (self.height, self.width)
        if self.encoding.channels == 3:
            shape += (3,)
        return a.reshape(shape)


#: On-disk / in-memory point layout: 24 bytes, little-endian.
POINT_DTYPE = np.dtype(
    [
        ("x", "<f4"),
        ("y", "<f4"),
        ("z", "<f4"),
        ("intensity", "<f4"),
        ("dt", "<u4"),       # ns offset from the frame timestamp
        ("channel", "<u2"),
        ("pad", "<u2"),
    ]
)


@dataclass(eq=False)
class PointCloud:
    """One LiDAR sweep. ``points`` is a structured array with POINT_DTYPE."""

    sensor: SensorId
    frame_timestamp: int  # ns UTC
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points)
        if pts.dtype != POINT_DTYPE:
            raise ValueError("points must use POINT_DTYPE")
        xyz = np.stack([pts["x"], pts["y"], pts["z"]], axis=-1)
        if not np.isfinite(xyz).all():
            raise ValueError("point coordinates must be finite")
        if pts.size and (
            not np.isfinite(pts["intensity"]).all()
            or pts["intensity"].min() < 0.0
            or pts["intensity"].max() > 1.0
        ):
            raise ValueError("intensity out of [0, 1]")
        if pts.size and int(pts["dt"].max()) >= FRAME_PERIOD_NS:
            raise ValueError("per-point dt must lie within one frame period")
        pts = np.ascontiguousarray(pts)
        pts.flags.writeable = False
        self.points = pts

    @staticmethod
    def from_arrays(sensor, frame_timestamp, x, y, z, intensity=None, dt=None, channel=None):
        n = len(x)
        pts = np.zeros(n, dtype=POINT_DTYPE)
        pts["x"], pts["y"], pts["z"] = x, y, z
        if intensity is not None:
            pts["intensity"] = intensity
        if dt is not None:
            pts["dt"] = dt
        if channel is not None:
            pts["channel"] = channel
        return PointCloud(sensor, frame_timestamp, pts)

    def xyz(self) -> np.ndarray:
        """(n, 3) float64 copy of the coordinates."""
        return np.stack(
            [self.points["x"], self.points["y"], self.points["z"]], axis=-1
        ).astype(np.float64)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        return (
            isinstance(other, PointCloud)
            and self.sensor == other.sensor
            and self.frame_timestamp == other.frame_timestamp
            and np.array_equal(self.points, other.points)
        )


@dataclass(eq=False)
class InsRecord:
    """One INS sample: geodetic position plus body-frame motion state."""

    timestamp: int  # ns UTC
    latitude: float
    longitude: float
    altitude: float
    orientation: np.ndarray  # unit quaternion (x, y, z, w), body-to-world
    velocity: np.ndarray     # m/s, body frame
    angular_rate: np.ndarray  # rad/s, body frame

    def __post_init__(self):
        q = np.asarray(self.orientation, dtype=np.float64).reshape(4)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ValueError("orientation quaternion is not unit length")
        if abs(self.latitude) > 90 or abs(self.longitude) > 180:
            raise ValueError("latitude/longitude out of range")
        self.orientation = _freeze(q)
        self.velocity = _freeze(np.asarray(self.velocity, dtype=np.float64).reshape(3))
        self.angular_rate = _freeze(
            np.asarray(self.angular_rate, dtype=np.float64).reshape(3)
        )

    def __eq__(self, other):
        return (
            isinstance(other, InsRecord)
            and self.timestamp == other.timestamp
            and self.latitude == other.latitude
            and self.longitude == other.longitude
            and self.altitude == other.altitude
            and np.array_equal(self.orientation, other.orientation)
            and np.array_equal(self.velocity, other.velocity)
            and np.array_equal(self.angular_rate, other.angular_rate)
        )


@dataclass(frozen=True)
class EgoMotionState:
    """Constant-twist motion of a sensor: linear velocity and angular rate,
    both expressed in the sensor frame."""

    linear_velocity: np.ndarray
    angular_velocity: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.linear_velocity, dtype=np.float64).reshape(3)
        w = np.asarray(self.angular_velocity, dtype=np.float64).reshape(3)
        if not (np.isfinite(v).all() and np.isfinite(w).all()):
            raise ValueError("motion state must be finite")
        object.__setattr__(self, "linear_velocity", _freeze(v))
        object.__setattr__(self, "angular_velocity", _freeze(w))


@dataclass(eq=False)
class Frame:
    """One synchronized snapshot: sensor records keyed by identity.

    ``completeness`` is advisory bookkeeping (False marks a required sensor
    that produced nothing for this trigger); it is derived during assembly,
    not serialized, and excluded from equality.
    """

    index: int
    reference_timestamp: int  # ns UTC, trigger instant
    records: dict  # SensorId -> CameraImage | PointCloud | list[InsRecord]
    completeness: dict = None

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("frame index must be >= 0")
        if self.completeness is None:
            self.completeness = {s: True for s in self.records}

    def sensors(self):
        return sorted(self.records, key=str)

    def __eq__(self, other):
        return (
            isinstance(other, Frame)
            and self.index == other.index
            and self.reference_timestamp == other.reference_timestamp
            and self.records == other.records
        )


@dataclass(eq=False)
class DatasetMeta:
    """Dataset header: format version, registry, intrinsics, calibration."""

    format_version: tuple = (1, 0)
    data_drop_id: str = ""
    agents: tuple = ()
    sensor_registry: tuple = ()
    intrinsics: dict = field(default_factory=dict)   # SensorId -> CameraIntrinsics
    calibration: dict = field(default_factory=dict)  # SensorId -> RigidTransform (sensor-to-root)
    creation_time: int = 0

    def __post_init__(self):
        self.format_version = (int(self.format_version[0]), int(self.format_version[1]))
        self.agents = tuple(self.agents)
        self.sensor_registry = tuple(self.sensor_registry)
        seen = set()
        for spec in self.sensor_registry:
            key = (spec.id.agent, spec.id.name)
            if key in seen:
                raise ValueError(f"duplicate sensor {spec.id} in registry")
            seen.add(key)
        by_id = {spec.id for spec in self.sensor_registry}
        for sid in list(self.intrinsics) + list(self.calibration):
            if sid not in by_id:
                raise ValueError(f"{sid} not in sensor registry")

    def registry_by_id(self) -> dict:
        return {spec.id: spec for spec in self.sensor_registry}

    def sensor_index(self) -> dict:
        """SensorId -> position in the registry (the codec's wire id)."""
        return {spec.id: i for i, spec in enumerate(self.sensor_registry)}

    def root_sensor(self, agent: Agent) -> SensorId:
        name = ROOT_SENSOR_NAME[agent]
        for spec in self.sensor_registry:
            if spec.id.agent is agent and spec.id.name == name:
                return spec.id
        raise KeyError(f"no root sensor for {agent.value}")

    def approx_equal(self, other: "DatasetMeta", tol: float = 1e-9) -> bool:
        """Semantic equality: exact except calibration rotations, which pass
        through a quaternion on disk (compared within ``tol``)."""
        if (
            self.format_version != other.format_version
            or self.data_drop_id != other.data_drop_id
            or self.agents != other.agents
            or self.sensor_registry != other.sensor_registry
            or self.creation_time != other.creation_time
            or set(self.intrinsics) != set(other.intrinsics)
            or set(self.calibration) != set(other.calibration)
        ):
            return False
        for sid, intr in self.intrinsics.items():
            o = other.intrinsics[sid]
            if (
                (intr.fx, intr.fy, intr.cx, intr.cy, intr.width, intr.height)
                != (o.fx, o.fy, o.cx, o.cy, o.width, o.height)
                or not np.array_equal(intr.distortion, o.distortion)
            ):
                return False
        return all(
            t.approx_equal(other.calibration[sid], tol)
            for sid, t in self.calibration.items()
        )
