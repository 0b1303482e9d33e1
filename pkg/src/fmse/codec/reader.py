""".4mse reading: streaming iteration, random access, integrity validation.

Opening a file parses and checksum-verifies the header and metadata.  On
seekable sources the footer index is loaded as well (leniently: a damaged
index disables random access but leaves streaming and validation usable).
Non-seekable sources report an unknown frame count and support one streaming
pass only.
"""

import hashlib
import io
import threading
from dataclasses import dataclass, field
from pathlib import Path

from ..crc32c import crc32c
from ..errors import (
    BadMagicError,
    ChecksumMismatchError,
    MetaChecksumError,
    NotSeekableError,
    OutOfRangeError,
    TruncatedFileError,
    UnsupportedMajorVersionError,
)
from ..model import Frame
from . import format as fmt
from .metadata import meta_from_json


@dataclass
class IndexEntry:
    frame_index: int
    byte_offset: int
    reference_timestamp: int


@dataclass
class RecordSpan:
    """Location of one record inside the file (tooling / diagnostics)."""

    kind: str
    offset: int
    payload_offset: int
    payload_length: int
    payload_type: int = fmt.PAYLOAD_NONE
    sensor: object = None
    frame_index: int = None


@dataclass
class IntegrityFailure:
    """One checksum mismatch.  ``frame_index`` is the index recorded in the
    enclosing frame header, or the frame's ordinal position when that header
    itself is unreadable."""

    record_kind: str
    frame_index: int
    sensor: object
    expected_checksum: int
    actual_checksum: int


@dataclass
class IntegrityReport:
    frames_checked: int = 0
    failures: list = field(default_factory=list)
    index_consistent: bool = True
    file_digest_ok: bool = True

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "frames_checked": self.frames_checked,
            "index_consistent": self.index_consistent,
            "file_digest_ok": self.file_digest_ok,
            "failures": [
                {
                    "record_kind": f.record_kind,
                    "frame_index": f.frame_index,
                    "sensor": str(f.sensor) if f.sensor is not None else None,
                    "expected_checksum": f.expected_checksum,
                    "actual_checksum": f.actual_checksum,
                }
                for f in self.failures
            ],
        }


def _read_exact(stream, n, what):
    data = stream.read(n)
    if data is None or len(data) != n:
        raise TruncatedFileError(f"unexpected end of file reading {what}")
    return data


def _read_record_header(stream):
    raw = _read_exact(stream, fmt.RECORD_HEADER.size, "record header")
    return _parse_record_header(raw)


def _parse_record_header(raw):
    kind, sensor_id, payload_type, flags, length, crc = fmt.RECORD_HEADER.unpack(raw)
    if kind not in fmt.KIND_NAMES:
        raise TruncatedFileError(f"unknown record kind {kind}")
    if flags:
        raise TruncatedFileError("reserved record flags set (v1 requires 0)")
    if length > fmt.MAX_PAYLOAD_LENGTH:
        raise TruncatedFileError("record payload exceeds the v1 size bound")
    return kind, sensor_id, payload_type, length, crc


def _decode_sensor_record(sensor, payload_type, payload):
    if payload_type == fmt.PAYLOAD_IMAGE:
        return fmt.decode_image_payload(sensor, payload)
    if payload_type == fmt.PAYLOAD_POINTCLOUD:
        return fmt.decode_pointcloud_payload(sensor, payload)
    if payload_type == fmt.PAYLOAD_INS_BLOCK:
        return fmt.decode_ins_payload(payload)
    raise TruncatedFileError(f"unknown payload type {payload_type}")


class DatasetReader:
    """Handle to one .4mse source.  Use :func:`open_dataset` to construct."""

    def __init__(self, source):
        self._path = None
        self._lock = threading.Lock()
        self._owns_stream = False
        if isinstance(source, (str, Path)):
            self._path = Path(source)
            stream = open(self._path, "rb")
            self._owns_stream = True
        else:
            stream = source
        self._stream = stream
        self._streamed = False

        header = _read_exact(stream, fmt.HEADER.size, "file header")
        magic, major, minor, meta_length, meta_crc = fmt.HEADER.unpack(header)
        if magic != fmt.MAGIC:
            raise BadMagicError(f"bad magic {magic!r}")
        if major != fmt.FORMAT_VERSION[0]:
            raise UnsupportedMajorVersionError(f"major version {major} not supported")
        self.version = (major, minor)
        meta_json = _read_exact(stream, meta_length, "metadata block")
        actual = crc32c(meta_json)
        if actual != meta_crc:
            raise MetaChecksumError(
                f"metadata checksum mismatch: expected {meta_crc:#010x}, got {actual:#010x}"
            )
        self.meta = meta_from_json(meta_json)
        self._data_start = fmt.HEADER.size + meta_length
        self._registry = list(self.meta.sensor_registry)

        self.index_entries = None
        self.file_digest = None
        self._index_error = None
        self._seekable = False
        try:
            self._seekable = stream.seekable()
        except AttributeError:
            pass
        if self._seekable:
            self._load_index()

    # -- construction helpers --------------------------------------------

    def _load_index(self):
        stream = self._stream
        end = stream.seek(0, io.SEEK_END)
        try:
            if end < self._data_start + fmt.FOOTER_TOTAL_SIZE:
                raise TruncatedFileError("file too short for a footer record")
            stream.seek(end - fmt.FOOTER_TOTAL_SIZE)
            kind, _, _, length, crc = _read_record_header(stream)
            if kind != fmt.KIND_FOOTER or length != fmt.FOOTER.size:
                raise TruncatedFileError("missing footer record")
            payload = _read_exact(stream, length, "footer payload")
            if crc32c(payload) != crc:
                raise ChecksumMismatchError("footer checksum mismatch")
            index_offset, digest = fmt.FOOTER.unpack(payload)
            self.file_digest = digest
            stream.seek(index_offset)
            kind, _, _, length, crc = _read_record_header(stream)
            if kind != fmt.KIND_INDEX:
                raise TruncatedFileError("footer does not point at an index record")
            payload = _read_exact(stream, length, "index payload")
            if crc32c(payload) != crc:
                raise ChecksumMismatchError("index checksum mismatch")
            (count,) = fmt.INDEX_COUNT.unpack_from(payload, 0)
            if len(payload) != fmt.INDEX_COUNT.size + count * fmt.INDEX_ENTRY.size:
                raise TruncatedFileError("index entry count disagrees with payload size")
            self.index_entries = [
                IndexEntry(
                    *fmt.INDEX_ENTRY.unpack_from(
                        payload, fmt.INDEX_COUNT.size + i * fmt.INDEX_ENTRY.size
                    )
                )
                for i in range(count)
            ]
        except (TruncatedFileError, ChecksumMismatchError) as e:
            # Damaged tail: keep streaming + validation available.
            self._index_error = e
            self.index_entries = None
        finally:
            stream.seek(self._data_start)

    # -- public surface ----------------------------------------------------

    @property
    def frame_count(self):
        """Number of frames, or None when only streaming is possible."""
        return len(self.index_entries) if self.index_entries is not None else None

    def stream_frames(self):
        """Ordered frame iterator; memory stays O(largest frame).

        A frame whose payload fails its checksum raises
        :class:`ChecksumMismatchError` from ``__next__``; the iterator has
        already advanced past the frame, so the caller may simply keep
        iterating to get the next one.
        """
        if self._path is not None:
            stream = open(self._path, "rb")
            stream.seek(self._data_start)
            return _FrameStream(stream, self._registry, owns_stream=True)
        if self._seekable:
            with self._lock:
                self._stream.seek(self._data_start)
        elif self._streamed:
            raise NotSeekableError("non-seekable source supports a single pass")
        self._streamed = True
        return _FrameStream(self._stream, self._registry, owns_stream=False)

    def get_frame(self, index: int) -> Frame:
        """Random access by position; equals the ``index``-th streamed frame."""
        if self.index_entries is None:
            if self._index_error is not None:
                raise self._index_error
            raise NotSeekableError("random access requires a seekable source")
        if not 0 <= index < len(self.index_entries):
            raise OutOfRangeError(
                f"frame {index} out of range [0, {len(self.index_entries)})"
            )
        entry = self.index_entries[index]
        if self._path is not None:
            with open(self._path, "rb") as stream:
                stream.seek(entry.byte_offset)
                return _read_frame_group(stream, self._registry)
        with self._lock:
            pos = self._stream.tell()
            try:
                self._stream.seek(entry.byte_offset)
                return _read_frame_group(self._stream, self._registry)
            finally:
                self._stream.seek(pos)

    def validate(self, check_digest: bool = True) -> IntegrityReport:
        """Recompute every record checksum; list all mismatches with their
        locations.  The whole-file digest is reported as a failure only when
        no record-level failure already explains it."""
        stream, close = self._fresh_stream()
        try:
            return _validate_stream(stream, self._registry, check_digest)
        finally:
            if close:
                stream.close()

    def record_spans(self):
        """RecordSpan for every record in file order (diagnostics, stats)."""
        stream, close = self._fresh_stream()
        try:
            stream.seek(self._data_start)
            spans = []
            frame_ordinal = -1
            current_frame = None
            for span, _crc, _raw, payload in _walk_records(stream, self._registry):
                if span.kind == "FRAME_START":
                    frame_ordinal += 1
                    if len(payload) == fmt.FRAME_START.size:
                        current_frame = fmt.FRAME_START.unpack(payload)[0]
                    else:
                        current_frame = frame_ordinal
                if span.kind in ("FRAME_START", "SENSOR_PAYLOAD", "FRAME_END"):
                    span.frame_index = current_frame
                spans.append(span)
            return spans
        finally:
            if close:
                stream.close()

    def _fresh_stream(self):
        if self._path is not None:
            return open(self._path, "rb"), True
        if not self._seekable:
            raise NotSeekableError("validation requires a seekable source")
        with self._lock:
            self._stream.seek(0)
        return self._stream, False

    def close(self):
        if self._owns_stream:
            self._stream.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __len__(self):
        if self.frame_count is None:
            raise NotSeekableError("frame count unknown on a non-seekable source")
        return self.frame_count


def open_dataset(source) -> DatasetReader:
    """Open a .4mse file path or binary stream."""
    return DatasetReader(source)


# -- record walking ----------------------------------------------------------


def _read_frame_group(stream, registry, first_header=None):
    """Read FRAME_START .. FRAME_END starting at the current position (or at
    ``first_header``, when the caller already consumed it).  The stream always
    ends up past FRAME_END; checksum failures raise only after the whole group
    has been consumed, so callers can continue with the next frame."""
    kind, _, _, length, crc = first_header or _read_record_header(stream)
    if kind != fmt.KIND_FRAME_START:
        raise TruncatedFileError(f"expected FRAME_START, found {fmt.KIND_NAMES[kind]}")
    if length != fmt.FRAME_START.size:
        raise TruncatedFileError("frame header payload has the wrong size")
    payload = _read_exact(stream, length, "frame header payload")
    failures = []
    frame_index, reference_timestamp = fmt.FRAME_START.unpack(payload)
    if crc32c(payload) != crc:
        failures.append((frame_index, None))

    records = {}
    while True:
        kind, sensor_idx, payload_type, length, crc = _read_record_header(stream)
        if kind == fmt.KIND_FRAME_END:
            payload = _read_exact(stream, length, "frame end payload")
            if crc32c(payload) != crc:
                failures.append((frame_index, None))
            break
        if kind != fmt.KIND_SENSOR_PAYLOAD:
            raise TruncatedFileError(
                f"expected SENSOR_PAYLOAD or FRAME_END, found {fmt.KIND_NAMES[kind]}"
            )
        if sensor_idx >= len(registry):
            raise TruncatedFileError(f"sensor id {sensor_idx} outside the registry")
        sensor = registry[sensor_idx].id
        payload = _read_exact(stream, length, f"payload of {sensor}")
        if crc32c(payload) != crc:
            failures.append((frame_index, sensor))
            continue
        records[sensor] = _decode_sensor_record(sensor, payload_type, payload)

    if failures:
        frame_idx, sensor = failures[0]
        raise ChecksumMismatchError(
            f"checksum mismatch in frame {frame_idx}"
            + (f", sensor {sensor}" if sensor else ""),
            frame_index=frame_idx,
            sensor=sensor,
        )
    return Frame(
        index=frame_index, reference_timestamp=reference_timestamp, records=records
    )


class _FrameStream:
    """Iterator over frame groups that survives per-frame checksum errors."""

    def __init__(self, stream, registry, owns_stream):
        self._stream = stream
        self._registry = registry
        self._owns = owns_stream
        self._done = False

    def __iter__(self):
        return self

    def __next__(self):
        if self._done:
            raise StopIteration
        raw = self._stream.read(fmt.RECORD_HEADER.size)
        if len(raw) != fmt.RECORD_HEADER.size:
            self._finish()
            raise TruncatedFileError("file ended before the index record")
        header = _parse_record_header(raw)
        if header[0] in (fmt.KIND_INDEX, fmt.KIND_FOOTER):
            self._finish()
            raise StopIteration
        try:
            return _read_frame_group(self._stream, self._registry, first_header=header)
        except TruncatedFileError:
            self._finish()
            raise

    def _finish(self):
        self._done = True
        if self._owns:
            self._stream.close()

    def close(self):
        self._finish()


def _walk_records(stream, registry):
    """Yield (RecordSpan, stored_crc, raw_header, payload) for every record
    from the current position to the end of the file."""
    offset = stream.tell()
    while True:
        raw = stream.read(fmt.RECORD_HEADER.size)
        if not raw:
            return
        if len(raw) != fmt.RECORD_HEADER.size:
            raise TruncatedFileError("dangling bytes where a record header should be")
        kind, sensor_idx, payload_type, length, crc = _parse_record_header(raw)
        payload = _read_exact(stream, length, fmt.KIND_NAMES[kind] + " payload")
        sensor = None
        if kind == fmt.KIND_SENSOR_PAYLOAD:
            if sensor_idx >= len(registry):
                raise TruncatedFileError(f"sensor id {sensor_idx} outside the registry")
            sensor = registry[sensor_idx].id
        span = RecordSpan(
            kind=fmt.KIND_NAMES[kind],
            offset=offset,
            payload_offset=offset + fmt.RECORD_HEADER.size,
            payload_length=length,
            payload_type=payload_type,
            sensor=sensor,
        )
        yield span, crc, raw, payload
        offset = span.payload_offset + length
        if kind == fmt.KIND_FOOTER:
            if stream.read(1):
                raise TruncatedFileError("trailing data after the footer record")
            return


def _validate_stream(stream, registry, check_digest):
    report = IntegrityReport()
    sha = hashlib.sha256()

    header = _read_exact(stream, fmt.HEADER.size, "file header")
    sha.update(header)
    magic, _major, _minor, meta_length, meta_crc = fmt.HEADER.unpack(header)
    if magic != fmt.MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    meta_json = _read_exact(stream, meta_length, "metadata block")
    sha.update(meta_json)
    if crc32c(meta_json) != meta_crc:
        report.failures.append(
            IntegrityFailure("META", None, None, meta_crc, crc32c(meta_json))
        )

    frame_ordinal = -1
    current_frame = None
    observed = []  # (FRAME_START offset, parsed (frame_index, ref_ts) or None)
    stored_index = None
    stored_footer = None
    saw_footer = False
    for span, crc, raw, payload in _walk_records(stream, registry):
        actual = crc32c(payload)
        crc_ok = actual == crc
        if span.kind == "FRAME_START":
            frame_ordinal += 1
            if len(payload) == fmt.FRAME_START.size:
                parsed = fmt.FRAME_START.unpack(payload)
                current_frame = parsed[0] if crc_ok else frame_ordinal
                observed.append((span.offset, parsed if crc_ok else None))
            else:
                current_frame = frame_ordinal
                observed.append((span.offset, None))
        if span.kind in ("FRAME_START", "SENSOR_PAYLOAD", "FRAME_END"):
            span.frame_index = current_frame
        if span.kind == "FRAME_END":
            report.frames_checked += 1
        if not crc_ok:
            report.failures.append(
                IntegrityFailure(span.kind, span.frame_index, span.sensor, crc, actual)
            )
        if span.kind == "INDEX" and crc_ok:
            (count,) = fmt.INDEX_COUNT.unpack_from(payload, 0)
            if len(payload) == fmt.INDEX_COUNT.size + count * fmt.INDEX_ENTRY.size:
                stored_index = [
                    fmt.INDEX_ENTRY.unpack_from(
                        payload, fmt.INDEX_COUNT.size + i * fmt.INDEX_ENTRY.size
                    )
                    for i in range(count)
                ]
        if span.kind == "FOOTER":
            saw_footer = True
            if crc_ok and len(payload) == fmt.FOOTER.size:
                stored_footer = fmt.FOOTER.unpack(payload)
        else:
            sha.update(raw)
            sha.update(payload)

    if not saw_footer:
        raise TruncatedFileError("no footer record found")
    if stored_index is not None:
        expected = [
            (parsed[0], off, parsed[1]) for off, parsed in observed if parsed is not None
        ]
        report.index_consistent = (
            len(observed) == len(stored_index) and stored_index == expected
        )
    if check_digest and stored_footer is not None:
        _index_offset, digest = stored_footer
        report.file_digest_ok = sha.digest() == digest
        if not report.file_digest_ok and not report.failures:
            report.failures.append(IntegrityFailure("FILE_DIGEST", None, None, 0, 0))
    return report
