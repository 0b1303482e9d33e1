"""Streaming .4mse writer.  Frames are consumed lazily, so datasets larger
than memory can be produced; only the index (24 bytes per frame) is held."""

import hashlib
from dataclasses import dataclass
from pathlib import Path

from ..crc32c import crc32c
from ..errors import IoFailureError, OrderViolationError, RegistryViolationError
from ..model import CameraImage, DatasetMeta, PointCloud
from . import format as fmt
from .metadata import meta_to_json


@dataclass
class WriteSummary:
    frames_written: int
    bytes_written: int


class _Sink:
    """Counts bytes and maintains the running file digest."""

    def __init__(self, stream):
        self.stream = stream
        self.sha = hashlib.sha256()
        self.offset = 0

    def write(self, data):
        try:
            self.stream.write(data)
        except OSError as e:
            raise IoFailureError(str(e)) from e
        self.sha.update(data)
        self.offset += len(data)


def _record(sink, kind, payload, sensor_id=0, payload_type=fmt.PAYLOAD_NONE):
    if len(payload) > fmt.MAX_PAYLOAD_LENGTH:
        raise IoFailureError("record payload exceeds the v1 size bound")
    header = fmt.RECORD_HEADER.pack(
        kind, sensor_id, payload_type, 0, len(payload), crc32c(payload)
    )
    sink.write(header)
    sink.write(payload)


def _sensor_payload(frame, sid):
    record = frame.records[sid]
    if isinstance(record, CameraImage):
        return fmt.PAYLOAD_IMAGE, fmt.encode_image_payload(record)
    if isinstance(record, PointCloud):
        return fmt.PAYLOAD_POINTCLOUD, fmt.encode_pointcloud_payload(record)
    if isinstance(record, (list, tuple)):
        return fmt.PAYLOAD_INS_BLOCK, fmt.encode_ins_payload(
            record, frame.reference_timestamp
        )
    raise RegistryViolationError(f"unsupported record type for {sid}")


def write_dataset(meta: DatasetMeta, frames, sink) -> WriteSummary:
    """Write ``meta`` and an iterable of frames to ``sink`` (path or stream).

    Frames must arrive in strictly ascending index order and may only
    reference sensors present in the metadata registry.
    """
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as f:
            return write_dataset(meta, frames, f)

    out = _Sink(sink)
    meta_json = meta_to_json(meta)
    out.write(
        fmt.HEADER.pack(
            fmt.MAGIC,
            meta.format_version[0],
            meta.format_version[1],
            len(meta_json),
            crc32c(meta_json),
        )
    )
    out.write(meta_json)

    index_map = meta.sensor_index()
    entries = []
    last_index = -1
    for frame in frames:
        if frame.index <= last_index:
            raise OrderViolationError(
                f"frame index {frame.index} after {last_index}"
            )
        last_index = frame.index
        for sid in frame.records:
            if sid not in index_map:
                raise RegistryViolationError(f"{sid} is not in the sensor registry")
        entries.append((frame.index, out.offset, frame.reference_timestamp))
        _record(
            out,
            fmt.KIND_FRAME_START,
            fmt.FRAME_START.pack(frame.index, frame.reference_timestamp),
        )
        for sid in sorted(frame.records, key=index_map.__getitem__):
            payload_type, payload = _sensor_payload(frame, sid)
            _record(
                out,
                fmt.KIND_SENSOR_PAYLOAD,
                payload,
                sensor_id=index_map[sid],
                payload_type=payload_type,
            )
        _record(out, fmt.KIND_FRAME_END, b"")

    index_offset = out.offset
    index_payload = fmt.INDEX_COUNT.pack(len(entries)) + b"".join(
        fmt.INDEX_ENTRY.pack(*e) for e in entries
    )
    _record(out, fmt.KIND_INDEX, index_payload)

    digest = out.sha.digest()  # covers every byte before the footer record
    _record(out, fmt.KIND_FOOTER, fmt.FOOTER.pack(index_offset, digest))
    return WriteSummary(frames_written=len(entries), bytes_written=out.offset)
