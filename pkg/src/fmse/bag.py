"""Export .4mse content to the rosbag v2.0 container.

One uncompressed chunk per frame keeps chunk boundaries aligned with the
dataset's natural unit.  Cameras map to sensor_msgs/Image, LiDARs to
sensor_msgs/PointCloud2 (fields x/y/z/intensity/t over the raw 24-byte point
structs), and INS samples to nav_msgs/Odometry, one message per sample, with
geodetic latitude/longitude/altitude carried in pose.position (frame
"wgs84") since the source data is global.  Calibration is emitted as one
latched tf message at the start of the bag unless the topic map disables it.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IoFailureError, UnmappedSensorError, UnsupportedEncodingError
from .model import CameraImage, Encoding, Modality, PointCloud

OP_MESSAGE_DATA = 0x02
OP_BAG_HEADER = 0x03
OP_INDEX_DATA = 0x04
OP_CHUNK = 0x05
OP_CHUNK_INFO = 0x06
OP_CONNECTION = 0x07

VERSION_LINE = b"#ROSBAG V2.0\n"
BAG_HEADER_LENGTH = 4096  # whole record, space-padded so it can be rewritten

IMAGE_TYPE = "sensor_msgs/Image"
IMAGE_MD5 = "060021388200f6f0f447d0fcd9c64743"
POINTCLOUD_TYPE = "sensor_msgs/PointCloud2"
POINTCLOUD_MD5 = "1158d486dd51d683ce2f1be655c3c181"
ODOMETRY_TYPE = "nav_msgs/Odometry"
ODOMETRY_MD5 = "cd5e73d190d741a2f92e81eda573aca7"
TF_TYPE = "tf2_msgs/TFMessage"
TF_MD5 = "94810edda583a504dfda3829e70d7eec"

_ENCODING_NAMES = {Encoding.RGB8: "rgb8", Encoding.BGR8: "bgr8", Encoding.MONO8: "mono8"}

_HEADER_DEF = """\
uint32 seq
time stamp
string frame_id
"""

IMAGE_DEFINITION = (
    "std_msgs/Header header\n"
    "uint32 height\n"
    "uint32 width\n"
    "string encoding\n"
    "uint8 is_bigendian\n"
    "uint32 step\n"
    "uint8[] data\n"
    "\n================================================================================\n"
    "MSG: std_msgs/Header\n" + _HEADER_DEF
)

POINTCLOUD_DEFINITION = (
    "std_msgs/Header header\n"
    "uint32 height\n"
    "uint32 width\n"
    "sensor_msgs/PointField[] fields\n"
    "bool is_bigendian\n"
    "uint32 point_step\n"
    "uint32 row_step\n"
    "uint8[] data\n"
    "bool is_dense\n"
    "\n================================================================================\n"
    "MSG: std_msgs/Header\n" + _HEADER_DEF +
    "\n================================================================================\n"
    "MSG: sensor_msgs/PointField\n"
    "uint8 INT8=1\nuint8 UINT8=2\nuint8 INT16=3\nuint8 UINT16=4\n"
    "uint8 INT32=5\nuint8 UINT32=6\nuint8 FLOAT32=7\nuint8 FLOAT64=8\n"
    "string name\nuint32 offset\nuint8 datatype\nuint32 count\n"
)

ODOMETRY_DEFINITION = (
    "std_msgs/Header header\n"
    "string child_frame_id\n"
    "geometry_msgs/PoseWithCovariance pose\n"
    "geometry_msgs/TwistWithCovariance twist\n"
    "\n================================================================================\n"
    "MSG: std_msgs/Header\n" + _HEADER_DEF +
    "\n================================================================================\n"
    "MSG: geometry_msgs/PoseWithCovariance\n"
    "geometry_msgs/Pose pose\nfloat64[36] covariance\n"
    "\n================================================================================\n"
    "MSG: geometry_msgs/Pose\n"
    "geometry_msgs/Point position\ngeometry_msgs/Quaternion orientation\n"
    "\n================================================================================\n"
    "MSG: geometry_msgs/Point\nfloat64 x\nfloat64 y\nfloat64 z\n"
    "\n================================================================================\n"
    "MSG: geometry_msgs/Quaternion\nfloat64 x\nfloat64 y\nfloat64 z\nfloat64 w\n"
    "\n================================================================================\n"
    "MSG: geometry_msgs/TwistWithCovariance\n"
    "geometry_msgs/Twist twist\nfloat64[36] covariance\n"
    "\n================================================================================\n"
    "MSG: geometry_msgs/Twist\n"
    "geometry_msgs/Vector3 linear\ngeometry_msgs/Vector3 angular\n"
    "\n================================================================================\n"
    "MSG: geometry_msgs/Vector3\nfloat64 x\nfloat64 y\nfloat64 z\n"
)

TF_DEFINITION = (
    "geometry_msgs/TransformStamped[] transforms\n"
    "\n================================================================================\n"
    "MSG: geometry_msgs/TransformStamped\n"
    "std_msgs/Header header\nstring child_frame_id\n"
    "geometry_msgs/Transform transform\n"
    "\n================================================================================\n"
    "MSG: std_msgs/Header\n" + _HEADER_DEF +
    "\n================================================================================\n"
    "MSG: geometry_msgs/Transform\n"
    "geometry_msgs/Vector3 translation\ngeometry_msgs/Quaternion rotation\n"
    "\n================================================================================\n"
    "MSG: geometry_msgs/Vector3\nfloat64 x\nfloat64 y\nfloat64 z\n"
    "\n================================================================================\n"
    "MSG: geometry_msgs/Quaternion\nfloat64 x\nfloat64 y\nfloat64 z\nfloat64 w\n"
)


@dataclass
class TopicMap:
    """SensorId -> topic string, plus the optional latched calibration topic."""

    topics: dict
    calibration_topic: str = "/tf_static"

    def __post_init__(self):
        seen = set()
        for sid, topic in self.topics.items():
            if not topic.startswith("/"):
                raise ValueError(f"topic for {sid} must start with '/': {topic!r}")
            if topic in seen:
                raise ValueError(f"duplicate topic {topic!r}")
            seen.add(topic)

    def topic_for(self, sensor):
        try:
            return self.topics[sensor]
        except KeyError:
            raise UnmappedSensorError(f"no topic mapped for {sensor}") from None


def default_topic_map(meta) -> TopicMap:
    """"/vehicle/camera/front_left"-style topics for every registry sensor."""
    segment = {
        Modality.CAMERA: "camera",
        Modality.LIDAR: "lidar",
        Modality.INS: "ins",
        Modality.GNSS: "gnss",
    }
    topics = {
        spec.id: f"/{spec.id.agent.value.lower()}/{segment[spec.id.modality]}/{spec.id.name.lower()}"
        for spec in meta.sensor_registry
    }
    return TopicMap(topics=topics)


def frame_id_for(sensor) -> str:
    return f"{sensor.agent.value}/{sensor.name}".lower()


# -- low-level record encoding -------------------------------------------------


def _fields(pairs) -> bytes:
    out = bytearray()
    for name, value in pairs:
        if isinstance(value, int):
            value = struct.pack("<I", value)
        elif isinstance(value, str):
            value = value.encode("utf-8")
        entry = name.encode("ascii") + b"=" + value
        out += struct.pack("<I", len(entry)) + entry
    return bytes(out)


def _record(header_pairs, data: bytes) -> bytes:
    header = _fields(header_pairs)
    return struct.pack("<I", len(header)) + header + struct.pack("<I", len(data)) + data


def _time(ns: int) -> bytes:
    return struct.pack("<II", ns // 1_000_000_000, ns % 1_000_000_000)


def _string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _ros_header(seq: int, stamp_ns: int, frame_id: str) -> bytes:
    return struct.pack("<I", seq) + _time(stamp_ns) + _string(frame_id)


# -- message serialization ------------------------------------------------------


def serialize_image_message(image: CameraImage, seq: int = 0) -> bytes:
    try:
        encoding = _ENCODING_NAMES[image.encoding]
    except KeyError:
        raise UnsupportedEncodingError(str(image.encoding)) from None
    step = image.width * image.encoding.channels
    return (
        _ros_header(seq, image.timestamp, frame_id_for(image.sensor))
        + struct.pack("<II", image.height, image.width)
        + _string(encoding)
        + struct.pack("<BI", 0, step)
        + struct.pack("<I", len(image.pixels))
        + image.pixels
    )


def serialize_pointcloud_message(cloud: PointCloud, seq: int = 0) -> bytes:
    data = cloud.points.tobytes()
    n = len(cloud)
    fields = [("x", 0, 7), ("y", 4, 7), ("z", 8, 7), ("intensity", 12, 7), ("t", 16, 6)]
    body = struct.pack("<I", len(fields))
    for name, offset, datatype in fields:
        body += _string(name) + struct.pack("<IBI", offset, datatype, 1)
    return (
        _ros_header(seq, cloud.frame_timestamp, frame_id_for(cloud.sensor))
        + struct.pack("<II", 1, n)  # height, width
        + body
        + struct.pack("<BII", 0, 24, 24 * n)  # is_bigendian, point_step, row_step
        + struct.pack("<I", len(data))
        + data
        + struct.pack("<B", 1)  # is_dense
    )


def serialize_nav_message(ins, seq: int = 0, frame_id: str = "wgs84",
                          child_frame_id: str = "") -> bytes:
    pose = struct.pack(
        "<7d",
        ins.latitude,
        ins.longitude,
        ins.altitude,
        ins.orientation[0],
        ins.orientation[1],
        ins.orientation[2],
        ins.orientation[3],
    )
    twist = struct.pack("<6d", *ins.velocity, *ins.angular_rate)
    zeros36 = struct.pack("<36d", *([0.0] * 36))
    return (
        _ros_header(seq, ins.timestamp, frame_id)
        + _string(child_frame_id)
        + pose
        + zeros36
        + twist
        + zeros36
    )


def serialize_tf_message(calibration, root_frames, stamp_ns: int) -> bytes:
    """tf2_msgs/TFMessage carrying every sensor-to-root transform."""
    entries = sorted(calibration.items(), key=lambda kv: str(kv[0]))
    out = struct.pack("<I", len(entries))
    for seq, (sensor, transform) in enumerate(entries):
        q = transform.quaternion()
        t = transform.translation
        out += (
            _ros_header(seq, stamp_ns, root_frames[sensor.agent])
            + _string(frame_id_for(sensor))
            + struct.pack("<3d", *t)
            + struct.pack("<4d", *q)
        )
    return out


# -- export ----------------------------------------------------------------------


@dataclass
class BagSummary:
    messages: int = 0
    connections: int = 0
    bytes: int = 0
    per_topic: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "messages": self.messages,
            "connections": self.connections,
            "bytes": self.bytes,
            "per_topic": dict(sorted(self.per_topic.items())),
        }


class _ConnectionTable:
    def __init__(self):
        self.records = []  # serialized connection records, by conn id
        self.by_topic = {}

    def get(self, topic, msg_type, md5, definition, latching=False):
        if topic in self.by_topic:
            return self.by_topic[topic], None
        conn = len(self.records)
        data_pairs = [
            ("topic", topic),
            ("type", msg_type),
            ("md5sum", md5),
            ("message_definition", definition),
        ]
        if latching:
            data_pairs.append(("latching", "1"))
        record = _record(
            [("op", bytes([OP_CONNECTION])), ("conn", conn), ("topic", topic)],
            _fields(data_pairs),
        )
        self.records.append(record)
        self.by_topic[topic] = conn
        return conn, record


def _connection_args(sensor, topic):
    if sensor.modality is Modality.CAMERA:
        return topic, IMAGE_TYPE, IMAGE_MD5, IMAGE_DEFINITION
    if sensor.modality is Modality.LIDAR:
        return topic, POINTCLOUD_TYPE, POINTCLOUD_MD5, POINTCLOUD_DEFINITION
    return topic, ODOMETRY_TYPE, ODOMETRY_MD5, ODOMETRY_DEFINITION


def _frame_messages(frame, topics, table):
    """(conn, time_ns, serialized message, new connection record or None)."""
    out = []
    for sensor in frame.sensors():
        record = frame.records[sensor]
        topic = topics.topic_for(sensor)
        if isinstance(record, CameraImage):
            conn, new = table.get(*_connection_args(sensor, topic))
            out.append((conn, record.timestamp, serialize_image_message(record, frame.index), new))
        elif isinstance(record, PointCloud):
            conn, new = table.get(*_connection_args(sensor, topic))
            out.append((conn, record.frame_timestamp,
                        serialize_pointcloud_message(record, frame.index), new))
        else:
            conn, new = table.get(*_connection_args(sensor, topic))
            for i, ins in enumerate(record):
                out.append((conn, ins.timestamp,
                            serialize_nav_message(ins, seq=i,
                                                  child_frame_id=frame_id_for(sensor)), new))
                new = None
    out.sort(key=lambda m: (m[1], m[0]))
    return out


def _write_chunk(sink, messages):
    """Write one uncompressed chunk + its index data records.

    ``messages``: (conn, time_ns, bytes, connection_record_or_None).
    Returns (chunk_pos, start_ns, end_ns, {conn: count}).
    """
    chunk = bytearray()
    index = {}  # conn -> [(time, offset)]
    for conn, t, payload, new_connection in messages:
        if new_connection:
            chunk += new_connection
        index.setdefault(conn, []).append((t, len(chunk)))
        chunk += _record(
            [("op", bytes([OP_MESSAGE_DATA])), ("conn", conn), ("time", _time(t))],
            payload,
        )
    chunk_pos = sink.tell()
    sink.write(
        _record(
            [
                ("op", bytes([OP_CHUNK])),
                ("compression", "none"),
                ("size", len(chunk)),
            ],
            bytes(chunk),
        )
    )
    for conn in sorted(index):
        entries = index[conn]
        data = b"".join(_time(t) + struct.pack("<I", off) for t, off in entries)
        sink.write(
            _record(
                [
                    ("op", bytes([OP_INDEX_DATA])),
                    ("ver", 1),
                    ("conn", conn),
                    ("count", len(entries)),
                ],
                data,
            )
        )
    times = [t for _, t, _, _ in messages]
    counts = {conn: len(v) for conn, v in index.items()}
    return chunk_pos, min(times), max(times), counts


def _bag_header_record(index_pos, conn_count, chunk_count) -> bytes:
    header = _fields(
        [
            ("op", bytes([OP_BAG_HEADER])),
            ("index_pos", struct.pack("<Q", index_pos)),
            ("conn_count", conn_count),
            ("chunk_count", chunk_count),
        ]
    )
    pad = BAG_HEADER_LENGTH - 4 - len(header) - 4
    return struct.pack("<I", len(header)) + header + struct.pack("<I", pad) + b" " * pad


def export_bag(reader, topics: TopicMap = None, sink=None) -> BagSummary:
    """Export every frame of ``reader`` to a rosbag v2.0 file.

    ``sink`` may be a path or a seekable binary stream (the bag header is
    back-patched with the final index position and counts).
    """
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as f:
            return export_bag(reader, topics, f)
    if sink is None or not sink.seekable():
        raise IoFailureError("bag export needs a seekable sink")
    if topics is None:
        topics = default_topic_map(reader.meta)

    summary = BagSummary()
    table = _ConnectionTable()
    chunks = []  # (pos, start, end, {conn: count})

    sink.write(VERSION_LINE)
    header_pos = sink.tell()
    sink.write(_bag_header_record(0, 0, 0))

    tf_pending = bool(reader.meta.calibration) and topics.calibration_topic is not None
    for frame in reader.stream_frames():
        messages = _frame_messages(frame, topics, table)
        if tf_pending:
            tf_pending = False
            conn, new = table.get(
                topics.calibration_topic, TF_TYPE, TF_MD5, TF_DEFINITION, latching=True
            )
            root_frames = {
                agent: frame_id_for(reader.meta.root_sensor(agent))
                for agent in {s.agent for s in reader.meta.calibration}
            }
            # Stamped at (and inserted before) the first message so the
            # latched extrinsics lead the bag without breaking monotonicity.
            stamp = min(
                [m[1] for m in messages], default=frame.reference_timestamp
            )
            messages.insert(
                0,
                (
                    conn,
                    stamp,
                    serialize_tf_message(reader.meta.calibration, root_frames, stamp),
                    new,
                ),
            )
        if not messages:
            continue
        chunks.append(_write_chunk(sink, messages))
        for conn, t, payload, _new in messages:
            topic = next(tp for tp, c in table.by_topic.items() if c == conn)
            summary.per_topic[topic] = summary.per_topic.get(topic, 0) + 1
            summary.messages += 1

    index_pos = sink.tell()
    for record in table.records:
        sink.write(record)
    for pos, start, end, counts in chunks:
        data = b"".join(
            struct.pack("<II", conn, n) for conn, n in sorted(counts.items())
        )
        sink.write(
            _record(
                [
                    ("op", bytes([OP_CHUNK_INFO])),
                    ("ver", 1),
                    ("chunk_pos", struct.pack("<Q", pos)),
                    ("start_time", _time(start)),
                    ("end_time", _time(end)),
                    ("count", len(counts)),
                ],
                data,
            )
        )
    end_pos = sink.tell()
    sink.seek(header_pos)
    sink.write(_bag_header_record(index_pos, len(table.records), len(chunks)))
    sink.seek(end_pos)

    summary.connections = len(table.records)
    summary.bytes = end_pos
    return summary
