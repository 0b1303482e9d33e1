"""Synthetic dataset builders: every test, demo, and parity artifact derives
its data from here so nothing depends on real recordings."""

import numpy as np

from .assembler import TriggerModel
from .model import (
    POINT_DTYPE,
    Agent,
    CameraImage,
    CameraIntrinsics,
    DatasetMeta,
    Encoding,
    Frame,
    InsRecord,
    Modality,
    PointCloud,
    RigidTransform,
    SensorId,
    SensorSpec,
)

EPOCH_NS = 1_700_000_000_000_000_000  # a fixed reference instant
PERIOD_NS = 100_000_000

_CAM = "a2A1920-51gcPRO"


def _cam(agent, name, hfov, vfov, focal_mm):
    return SensorSpec(
        id=SensorId(agent, name, Modality.CAMERA),
        resolution=(1920, 1200),
        frequency=10.0,
        hfov=hfov,
        vfov=vfov,
        details={
            "model": _CAM,
            "exposure_time_us": 800,
            "focal_length_mm": focal_mm,
            "aperture": "f/4.0",
        },
    )


def _lidar(agent, name, model, resolution, hfov, vfov, range_m):
    return SensorSpec(
        id=SensorId(agent, name, Modality.LIDAR),
        resolution=resolution,
        frequency=10.0,
        hfov=hfov,
        vfov=vfov,
        details={"model": model, "range_10pct_m": range_m},
    )


def full_registry() -> tuple:
    """The complete two-agent sensor fleet."""
    v = Agent.VEHICLE
    t = Agent.TOWER
    return (
        _cam(v, "STEREO_LEFT", 57.6, 37.7, 6),
        _cam(v, "STEREO_RIGHT", 57.6, 37.7, 6),
        _cam(v, "BACK_LEFT", 57.6, 37.7, 6),
        _cam(v, "BACK_RIGHT", 57.6, 37.7, 6),
        _cam(v, "FRONT_LEFT", 79.1, 54.3, 4),
        _cam(v, "FRONT_RIGHT", 79.1, 54.3, 4),
        _lidar(v, "LIDAR_TOP", "OS1", (1024, 128), 360.0, 45.0, 90),
        _lidar(v, "LIDAR_LEFT", "OS0", (1024, 128), 360.0, 90.0, 35),
        _lidar(v, "LIDAR_RIGHT", "OS0", (1024, 128), 360.0, 90.0, 35),
        SensorSpec(
            id=SensorId(v, "INS", Modality.INS),
            resolution=(1, 1),
            frequency=1000.0,
            hfov=360.0,
            vfov=180.0,
            details={
                "model": "3DM-GQ7",
                "accuracy": "1cm RTK, 0.2deg heading, 0.05deg pitch/roll",
            },
        ),
        _cam(t, "TOWER_CAM_1", 57.6, 37.7, 6),
        _cam(t, "TOWER_CAM_2", 57.6, 37.7, 6),
        _lidar(t, "TOWER_LIDAR_1", "Cube 1 Outdoor", (400, 51), 70.0, 30.0, 30),
        _lidar(t, "TOWER_LIDAR_2", "Cube 1 Outdoor", (400, 51), 70.0, 30.0, 30),
        _lidar(t, "TOWER_LIDAR_TOP", "OS2", (1024, 128), 360.0, 22.5, 200),
        SensorSpec(
            id=SensorId(t, "GNSS", Modality.GNSS),
            resolution=(1, 1),
            frequency=1.0,
            hfov=360.0,
            vfov=180.0,
            details={"model": "C099-F9P", "mode": "RTK base, PPP > 1h"},
        ),
    )


def sensor(registry, name) -> SensorId:
    matches = [s.id for s in registry if s.id.name == name]
    if len(matches) != 1:
        raise KeyError(name)
    return matches[0]


def table_intrinsics(width=1920, height=1200, fx=1746.1) -> CameraIntrinsics:
    """Full-resolution intrinsics whose focal length reproduces the fleet
    camera's 57.6 degree horizontal field of view."""
    return CameraIntrinsics(
        fx=fx,
        fy=fx,
        cx=(width - 1) / 2.0,
        cy=(height - 1) / 2.0,
        distortion=np.array([-0.12, 0.05, 0.0005, -0.0003, 0.01]),
        width=width,
        height=height,
    )


def small_intrinsics(width=64, height=48, distortion=None) -> CameraIntrinsics:
    if distortion is None:
        distortion = np.zeros(5)
    return CameraIntrinsics(
        fx=60.0,
        fy=60.0,
        cx=(width - 1) / 2.0,
        cy=(height - 1) / 2.0,
        distortion=np.asarray(distortion, dtype=np.float64),
        width=width,
        height=height,
    )


def random_rigid(rng) -> RigidTransform:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return RigidTransform.from_quaternion(q, rng.uniform(-5.0, 5.0, size=3))


def random_unit_quaternion(rng) -> np.ndarray:
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def random_points(rng, n, scale=20.0) -> np.ndarray:
    pts = np.zeros(n, dtype=POINT_DTYPE)
    pts["x"] = rng.normal(0, scale, n).astype(np.float32)
    pts["y"] = rng.normal(0, scale, n).astype(np.float32)
    pts["z"] = rng.normal(0, scale, n).astype(np.float32)
    pts["intensity"] = rng.random(n).astype(np.float32)
    pts["dt"] = rng.integers(0, PERIOD_NS, n, dtype=np.uint32)
    pts["channel"] = rng.integers(0, 128, n, dtype=np.uint16)
    return pts


def random_image(rng, sensor_id, timestamp, width=16, height=12, encoding=Encoding.RGB8):
    n = width * height * encoding.channels
    return CameraImage(
        sensor=sensor_id,
        timestamp=timestamp,
        width=width,
        height=height,
        encoding=encoding,
        pixels=rng.integers(0, 256, n, dtype=np.uint8).tobytes(),
        exposure_us=800,
    )


def random_ins_record(rng, timestamp) -> InsRecord:
    return InsRecord(
        timestamp=timestamp,
        latitude=48.0 + rng.uniform(-0.01, 0.01),
        longitude=9.0 + rng.uniform(-0.01, 0.01),
        altitude=300.0 + rng.uniform(-1, 1),
        orientation=random_unit_quaternion(rng),
        velocity=rng.uniform(-10, 10, 3),
        angular_rate=rng.uniform(-0.5, 0.5, 3),
    )


def ins_block(rng, reference_ts, rate_hz=1000, count=10) -> list:
    step = 1_000_000_000 // rate_hz
    start = reference_ts - (count // 2) * step
    return [random_ins_record(rng, start + i * step) for i in range(count)]


def make_meta(sensor_names=None, rng=None, data_drop_id="drop-000") -> DatasetMeta:
    """Meta with a registry subset, synthetic intrinsics for every camera,
    and a random (root-anchored) calibration for every sensor."""
    rng = rng or np.random.default_rng(0)
    registry = full_registry()
    if sensor_names is not None:
        registry = tuple(s for s in registry if s.id.name in sensor_names)
    agents = tuple(sorted({s.id.agent for s in registry}, key=lambda a: a.value))
    intrinsics = {
        s.id: small_intrinsics() for s in registry if s.id.modality is Modality.CAMERA
    }
    calibration = {}
    for s in registry:
        root = {Agent.VEHICLE: "LIDAR_TOP", Agent.TOWER: "TOWER_LIDAR_TOP"}[s.id.agent]
        if not any(r.id.name == root and r.id.agent is s.id.agent for r in registry):
            continue
        if s.id.name == root:
            calibration[s.id] = RigidTransform.identity()
        else:
            calibration[s.id] = random_rigid(rng)
    return DatasetMeta(
        format_version=(1, 0),
        data_drop_id=data_drop_id,
        agents=agents,
        sensor_registry=registry,
        intrinsics=intrinsics,
        calibration=calibration,
        creation_time=EPOCH_NS,
    )


DEFAULT_SENSORS = ("STEREO_LEFT", "LIDAR_TOP", "LIDAR_LEFT", "INS", "TOWER_LIDAR_TOP", "TOWER_LIDAR_1")


def random_frame(rng, meta, index, max_points=1000, image_size=(16, 12)) -> Frame:
    ref = EPOCH_NS + index * PERIOD_NS
    records = {}
    for spec in meta.sensor_registry:
        sid = spec.id
        if sid.modality is Modality.CAMERA:
            records[sid] = random_image(
                rng, sid, ref + int(rng.integers(-2_000_000, 2_000_000)),
                width=image_size[0], height=image_size[1],
                encoding=Encoding.MONO8 if rng.random() < 0.3 else Encoding.RGB8,
            )
        elif sid.modality is Modality.LIDAR:
            n = int(rng.integers(1, max_points + 1))
            records[sid] = PointCloud(sid, ref, random_points(rng, n))
        elif sid.modality is Modality.INS:
            records[sid] = ins_block(rng, ref, count=int(rng.integers(2, 8)))
    return Frame(index=index, reference_timestamp=ref, records=records)


def random_dataset(rng, max_frames=10, max_points=1000, sensor_names=DEFAULT_SENSORS):
    meta = make_meta(sensor_names, rng=rng)
    n = int(rng.integers(0, max_frames + 1))
    frames = [random_frame(rng, meta, i, max_points=max_points) for i in range(n)]
    return meta, frames


def corruption_fixture():
    """Small deterministic dataset: every record kind present, ~3 KiB of
    payload, so exhaustive bit-flipping stays fast."""
    rng = np.random.default_rng(42)
    meta = make_meta(("STEREO_LEFT", "LIDAR_TOP", "INS"), rng=rng)
    sl = sensor(meta.sensor_registry, "STEREO_LEFT")
    lt = sensor(meta.sensor_registry, "LIDAR_TOP")
    ins = sensor(meta.sensor_registry, "INS")
    frames = []
    for i in range(2):
        ref = EPOCH_NS + i * PERIOD_NS
        records = {
            sl: random_image(rng, sl, ref + 1000, width=8, height=6, encoding=Encoding.MONO8),
            lt: PointCloud(lt, ref, random_points(rng, 12 - 4 * i)),
        }
        if i == 0:
            records[ins] = ins_block(rng, ref, count=2)
        frames.append(Frame(index=i, reference_timestamp=ref, records=records))
    return meta, frames


def large_dataset(target_bytes=256 * 1024 * 1024, points_per_frame=349_525, seed=7):
    """(meta, lazy frame iterator, frame payload size) for streaming tests.

    Frames are generated on the fly so writing never holds more than one.
    """
    rng = np.random.default_rng(seed)
    meta = make_meta(("LIDAR_TOP",), rng=rng)
    lt = sensor(meta.sensor_registry, "LIDAR_TOP")
    base = random_points(rng, points_per_frame)
    frame_payload = points_per_frame * POINT_DTYPE.itemsize
    count = max(1, int(np.ceil(target_bytes / frame_payload)))

    def frames():
        for i in range(count):
            pts = base.copy()
            pts["channel"][:] = i % 128  # cheap per-frame variation
            yield Frame(
                index=i,
                reference_timestamp=EPOCH_NS + i * PERIOD_NS,
                records={lt: PointCloud(lt, EPOCH_NS + i * PERIOD_NS, pts)},
            )

    return meta, frames(), frame_payload, count


def parity_fixture(frame_count=45):
    """Deterministic >= 43-frame dataset for cross-implementation checks."""
    rng = np.random.default_rng(2024)
    names = ("STEREO_LEFT", "FRONT_LEFT", "LIDAR_TOP", "INS", "TOWER_LIDAR_TOP", "TOWER_LIDAR_1")
    meta = make_meta(names, rng=rng)
    frames = [
        random_frame(rng, meta, i, max_points=200, image_size=(32, 24))
        for i in range(frame_count)
    ]
    return meta, frames


# -- raw capture fixture (CLI `assemble` input) ---------------------------------


def assembly_capture(rng=None, frame_count=5, jitter_ns=2_000_000):
    """Raw records emulating a jittery but in-tolerance capture."""
    rng = rng or np.random.default_rng(3)
    meta = make_meta(("STEREO_LEFT", "LIDAR_TOP", "INS"), rng=rng)
    sl = sensor(meta.sensor_registry, "STEREO_LEFT")
    lt = sensor(meta.sensor_registry, "LIDAR_TOP")
    ins = sensor(meta.sensor_registry, "INS")
    trigger = TriggerModel(phase=EPOCH_NS)
    records = []
    for k in range(frame_count):
        ref = EPOCH_NS + k * PERIOD_NS
        records.append(
            random_image(rng, sl, ref + int(rng.integers(-jitter_ns, jitter_ns + 1)),
                         width=8, height=6, encoding=Encoding.MONO8)
        )
        records.append(PointCloud(lt, ref, random_points(rng, 16)))
    series = {
        ins: [
            random_ins_record(rng, EPOCH_NS - PERIOD_NS // 2 + i * 10_000_000)
            for i in range(frame_count * 10 + 10)
        ]
    }
    return meta, records, series, trigger
