"""Byte-level layout of the .4mse container (see FORMAT.md for diagrams).

All integers little-endian.  File = header, metadata JSON, frame record
groups (FRAME_START, SENSOR_PAYLOAD*, FRAME_END), INDEX record, FOOTER
record.  Every record carries a CRC-32C of its payload; the footer holds the
byte offset of the index plus a SHA-256 over every byte before the footer.
"""

import struct

import numpy as np

from ..errors import TruncatedFileError, UnsupportedEncodingError
from ..model import POINT_DTYPE, CameraImage, Encoding, InsRecord, PointCloud

MAGIC = b"4MSE"
FORMAT_VERSION = (1, 0)

# magic, major, minor, meta_length, meta_checksum
HEADER = struct.Struct("<4sHHQI")
# record_kind, sensor_id, payload_type, flags, payload_length, payload_checksum
RECORD_HEADER = struct.Struct("<BHBBQI")
# frame_index, reference_timestamp
FRAME_START = struct.Struct("<QQ")
# frame_index, byte_offset, reference_timestamp
INDEX_ENTRY = struct.Struct("<QQQ")
INDEX_COUNT = struct.Struct("<Q")
# index_offset, sha256 of all preceding bytes
FOOTER = struct.Struct("<Q32s")
# width, height, encoding, 3 pad bytes, exposure_us
IMAGE_SUBHEADER = struct.Struct("<IIB3xI")
# leading record timestamp on every sensor payload
PAYLOAD_TIMESTAMP = struct.Struct("<Q")

FOOTER_TOTAL_SIZE = RECORD_HEADER.size + FOOTER.size  # 57 bytes, fixed tail

KIND_FRAME_START = 1
KIND_SENSOR_PAYLOAD = 2
KIND_FRAME_END = 3
KIND_INDEX = 4
KIND_FOOTER = 5

KIND_NAMES = {
    KIND_FRAME_START: "FRAME_START",
    KIND_SENSOR_PAYLOAD: "SENSOR_PAYLOAD",
    KIND_FRAME_END: "FRAME_END",
    KIND_INDEX: "INDEX",
    KIND_FOOTER: "FOOTER",
}

PAYLOAD_NONE = 0
PAYLOAD_IMAGE = 1
PAYLOAD_POINTCLOUD = 2
PAYLOAD_INS_BLOCK = 3

FLAG_COMPRESSED = 0x01  # reserved, must be 0 in v1

MAX_PAYLOAD_LENGTH = (1 << 32) - 1  # single-record sanity bound for v1

ENCODING_CODES = {Encoding.RGB8: 1, Encoding.BGR8: 2, Encoding.MONO8: 3}
ENCODING_FROM_CODE = {v: k for k, v in ENCODING_CODES.items()}

#: 112-byte INS sample: u64 timestamp + 13 float64 fields.
INS_DTYPE = np.dtype(
    [
        ("timestamp", "<u8"),
        ("latitude", "<f8"),
        ("longitude", "<f8"),
        ("altitude", "<f8"),
        ("qx", "<f8"),
        ("qy", "<f8"),
        ("qz", "<f8"),
        ("qw", "<f8"),
        ("vx", "<f8"),
        ("vy", "<f8"),
        ("vz", "<f8"),
        ("wx", "<f8"),
        ("wy", "<f8"),
        ("wz", "<f8"),
    ]
)


def encode_image_payload(image: CameraImage) -> bytes:
    sub = IMAGE_SUBHEADER.pack(
        image.width,
        image.height,
        ENCODING_CODES[image.encoding],
        image.exposure_us,
    )
    return PAYLOAD_TIMESTAMP.pack(image.timestamp) + sub + image.pixels


def decode_image_payload(sensor, payload: bytes) -> CameraImage:
    head = PAYLOAD_TIMESTAMP.size + IMAGE_SUBHEADER.size
    if len(payload) < head:
        raise TruncatedFileError("image payload shorter than its sub-header")
    (timestamp,) = PAYLOAD_TIMESTAMP.unpack_from(payload, 0)
    width, height, code, exposure = IMAGE_SUBHEADER.unpack_from(
        payload, PAYLOAD_TIMESTAMP.size
    )
    encoding = ENCODING_FROM_CODE.get(code)
    if encoding is None:
        raise UnsupportedEncodingError(f"unknown image encoding code {code}")
    return CameraImage(
        sensor=sensor,
        timestamp=timestamp,
        width=width,
        height=height,
        encoding=encoding,
        pixels=bytes(payload[head:]),
        exposure_us=exposure,
    )


def encode_pointcloud_payload(cloud: PointCloud) -> bytes:
    return PAYLOAD_TIMESTAMP.pack(cloud.frame_timestamp) + cloud.points.tobytes()


def decode_pointcloud_payload(sensor, payload) -> PointCloud:
    (timestamp,) = PAYLOAD_TIMESTAMP.unpack_from(payload, 0)
    body = memoryview(payload)[PAYLOAD_TIMESTAMP.size:]
    if len(body) % POINT_DTYPE.itemsize:
        raise TruncatedFileError("point cloud payload is not a whole number of points")
    points = np.frombuffer(body, dtype=POINT_DTYPE)
    return PointCloud(sensor=sensor, frame_timestamp=timestamp, points=points)


def encode_ins_payload(records, reference_timestamp: int) -> bytes:
    block = np.zeros(len(records), dtype=INS_DTYPE)
    for i, r in enumerate(records):
        block[i] = (
            r.timestamp,
            r.latitude,
            r.longitude,
            r.altitude,
            r.orientation[0],
            r.orientation[1],
            r.orientation[2],
            r.orientation[3],
            r.velocity[0],
            r.velocity[1],
            r.velocity[2],
            r.angular_rate[0],
            r.angular_rate[1],
            r.angular_rate[2],
        )
    return PAYLOAD_TIMESTAMP.pack(reference_timestamp) + block.tobytes()


def decode_ins_payload(payload) -> list:
    body = memoryview(payload)[PAYLOAD_TIMESTAMP.size:]
    if len(body) % INS_DTYPE.itemsize:
        raise TruncatedFileError("INS payload is not a whole number of records")
    block = np.frombuffer(body, dtype=INS_DTYPE)
    return [
        InsRecord(
            timestamp=int(r["timestamp"]),
            latitude=float(r["latitude"]),
            longitude=float(r["longitude"]),
            altitude=float(r["altitude"]),
            orientation=[r["qx"], r["qy"], r["qz"], r["qw"]],
            velocity=[r["vx"], r["vy"], r["vz"]],
            angular_rate=[r["wx"], r["wy"], r["wz"]],
        )
        for r in block
    ]
