import io
import json
import struct

import numpy as np
import pytest

from fmse import fixtures
from fmse.codec import format as fmt
from fmse.codec import meta_from_json, meta_to_json, open_dataset, write_dataset
from fmse.errors import (
    BadMagicError,
    ChecksumMismatchError,
    MetaChecksumError,
    NotSeekableError,
    OrderViolationError,
    OutOfRangeError,
    RegistryViolationError,
    TruncatedFileError,
    UnsupportedMajorVersionError,
)
from fmse.model import Frame, PointCloud

import oracles


def build_bytes(meta, frames):
    buf = io.BytesIO()
    write_dataset(meta, frames, buf)
    return buf.getvalue()


@pytest.fixture
def small(rng):
    meta, frames = fixtures.random_dataset(rng, max_frames=5, max_points=100)
    while not frames:  # want a non-empty dataset here
        meta, frames = fixtures.random_dataset(rng, max_frames=5, max_points=100)
    return meta, frames, build_bytes(meta, frames)


class TestWrite:
    def test_empty_dataset_round_trips(self, rng):
        meta = fixtures.make_meta(("LIDAR_TOP",), rng=rng)
        blob = build_bytes(meta, [])
        reader = open_dataset(io.BytesIO(blob))
        assert reader.frame_count == 0
        assert reader.meta.approx_equal(meta)
        assert list(reader.stream_frames()) == []

    def test_three_frames_stream_in_order(self, small):
        meta, frames, blob = small
        out = list(open_dataset(io.BytesIO(blob)).stream_frames())
        assert out == frames

    def test_unknown_sensor_rejected(self, rng):
        meta = fixtures.make_meta(("LIDAR_TOP",), rng=rng)
        stranger = fixtures.sensor(fixtures.full_registry(), "LIDAR_LEFT")
        frame = Frame(0, fixtures.EPOCH_NS,
                      {stranger: PointCloud(stranger, fixtures.EPOCH_NS,
                                            fixtures.random_points(rng, 3))})
        with pytest.raises(RegistryViolationError):
            build_bytes(meta, [frame])

    def test_nonascending_index_rejected(self, rng):
        meta = fixtures.make_meta(("LIDAR_TOP",), rng=rng)
        lt = fixtures.sensor(meta.sensor_registry, "LIDAR_TOP")

        def frame(i):
            return Frame(i, fixtures.EPOCH_NS + i,
                         {lt: PointCloud(lt, fixtures.EPOCH_NS + i,
                                         fixtures.random_points(rng, 2))})

        with pytest.raises(OrderViolationError):
            build_bytes(meta, [frame(1), frame(1)])

    def test_byte_length_matches_documented_layout(self, rng):
        # one frame holding one 4-point cloud, sizes summed by hand:
        # header 20, meta M, FRAME_START 17+16, SENSOR_PAYLOAD 17+8+4*24,
        # FRAME_END 17, INDEX 17+8+24, FOOTER 17+40
        meta = fixtures.make_meta(("LIDAR_TOP",), rng=rng)
        lt = fixtures.sensor(meta.sensor_registry, "LIDAR_TOP")
        frame = Frame(0, fixtures.EPOCH_NS,
                      {lt: PointCloud(lt, fixtures.EPOCH_NS, fixtures.random_points(rng, 4))})
        blob = build_bytes(meta, [frame])
        meta_len = len(meta_to_json(meta))
        expected = 20 + meta_len + (17 + 16) + (17 + 8 + 4 * 24) + 17 + (17 + 8 + 24) + (17 + 40)
        assert len(blob) == expected


class TestOpen:
    def test_bad_magic(self, small):
        blob = bytearray(small[2])
        blob[0] ^= 0xFF
        with pytest.raises(BadMagicError):
            open_dataset(io.BytesIO(bytes(blob)))

    def test_unsupported_major_version(self, small):
        blob = bytearray(small[2])
        struct.pack_into("<H", blob, 4, 99)
        with pytest.raises(UnsupportedMajorVersionError):
            open_dataset(io.BytesIO(bytes(blob)))

    def test_meta_corruption_detected(self, small):
        blob = bytearray(small[2])
        blob[fmt.HEADER.size + 5] ^= 0x01
        with pytest.raises(MetaChecksumError):
            open_dataset(io.BytesIO(bytes(blob)))

    def test_truncated_header(self):
        with pytest.raises(TruncatedFileError):
            open_dataset(io.BytesIO(b"4MS"))

    def test_minor_version_accepted_and_unknown_keys_ignored(self, rng):
        # forward compatibility: a v1.1 file with extra meta keys still opens
        meta = fixtures.make_meta(("LIDAR_TOP",), rng=rng)
        doc = json.loads(meta_to_json(meta))
        doc["format_version"] = [1, 1]
        doc["user_extension"] = {"anything": [1, 2, 3]}
        doc["sensor_registry"][0]["future_field"] = "ignored"
        raw = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        from fmse.crc32c import crc32c

        buf = io.BytesIO()
        buf.write(fmt.HEADER.pack(fmt.MAGIC, 1, 1, len(raw), crc32c(raw)))
        buf.write(raw)
        # no frames: index + footer
        import hashlib

        index_offset = buf.tell()
        payload = fmt.INDEX_COUNT.pack(0)
        buf.write(fmt.RECORD_HEADER.pack(fmt.KIND_INDEX, 0, 0, 0, len(payload), crc32c(payload)))
        buf.write(payload)
        digest = hashlib.sha256(buf.getvalue()).digest()
        fpayload = fmt.FOOTER.pack(index_offset, digest)
        buf.write(fmt.RECORD_HEADER.pack(fmt.KIND_FOOTER, 0, 0, 0, len(fpayload), crc32c(fpayload)))
        buf.write(fpayload)
        buf.seek(0)
        reader = open_dataset(buf)
        assert reader.version == (1, 1)
        assert reader.frame_count == 0
        assert reader.validate().ok

    def test_v2_rejected(self, rng):
        meta = fixtures.make_meta(("LIDAR_TOP",), rng=rng)
        raw = meta_to_json(meta)
        from fmse.crc32c import crc32c

        buf = io.BytesIO(fmt.HEADER.pack(fmt.MAGIC, 2, 0, len(raw), crc32c(raw)) + raw)
        with pytest.raises(UnsupportedMajorVersionError):
            open_dataset(buf)


class TestStreaming:
    def test_checksum_error_then_continue(self, rng):
        meta, frames = fixtures.random_dataset(rng, max_frames=3, max_points=50)
        while len(frames) != 3:
            meta, frames = fixtures.random_dataset(rng, max_frames=3, max_points=50)
        blob = bytearray(build_bytes(meta, frames))
        # flip one payload byte inside frame 1
        target = [
            r for r in oracles.parse_records(bytes(blob))
            if r[0] == "SENSOR_PAYLOAD" and r[1] == 1
        ][0]
        blob[target[3] + target[4] // 2] ^= 0x10

        stream = open_dataset(io.BytesIO(bytes(blob))).stream_frames()
        assert next(stream) == frames[0]
        with pytest.raises(ChecksumMismatchError) as err:
            next(stream)
        assert err.value.frame_index == 1
        assert next(stream) == frames[2]
        with pytest.raises(StopIteration):
            next(stream)

    def test_truncated_mid_frame(self, small):
        meta, frames, blob = small
        reader = open_dataset(io.BytesIO(blob[: len(blob) // 2]))
        with pytest.raises(TruncatedFileError):
            list(reader.stream_frames())

    def test_non_seekable_stream(self, small):
        meta, frames, blob = small

        class Raw(io.RawIOBase):
            def __init__(self, data):
                self._b = io.BytesIO(data)

            def readinto(self, b):
                return self._b.readinto(b)

            def readable(self):
                return True

            def seekable(self):
                return False

        reader = open_dataset(io.BufferedReader(Raw(blob)))
        assert reader.frame_count is None
        assert list(reader.stream_frames()) == frames
        with pytest.raises(NotSeekableError):
            reader.get_frame(0)


class TestRandomAccess:
    def test_get_frame_equals_stream(self, small):
        meta, frames, blob = small
        reader = open_dataset(io.BytesIO(blob))
        streamed = list(reader.stream_frames())
        for i in (len(frames) - 1, 0, len(frames) // 2):
            assert reader.get_frame(i) == streamed[i]

    def test_out_of_range(self, small):
        meta, frames, blob = small
        reader = open_dataset(io.BytesIO(blob))
        with pytest.raises(OutOfRangeError):
            reader.get_frame(len(frames))
        with pytest.raises(OutOfRangeError):
            reader.get_frame(-1)

    def test_concurrent_get_frame_from_path(self, small, tmp_path):
        meta, frames, blob = small
        path = tmp_path / "scene.4mse"
        path.write_bytes(blob)
        reader = open_dataset(path)
        import threading

        errors = []

        def worker(i):
            try:
                for _ in range(10):
                    assert reader.get_frame(i) == frames[i]
            except Exception as e:  # noqa: BLE001
                errors.append(e)

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(len(frames))]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors


class TestValidate:
    def test_pristine(self, small):
        report = open_dataset(io.BytesIO(small[2])).validate()
        assert report.ok and not report.failures
        assert report.index_consistent and report.file_digest_ok

    def test_single_flip_names_the_record(self, small):
        meta, frames, blob = small
        records = [r for r in oracles.parse_records(blob) if r[4] > 0]
        registry = list(meta.sensor_registry)
        rng = np.random.default_rng(0)
        for kind, frame_idx, sensor_idx, off, length, _crc in records:
            corrupted = bytearray(blob)
            corrupted[off + int(rng.integers(0, length))] ^= 1 << int(rng.integers(0, 8))
            report = open_dataset(io.BytesIO(bytes(corrupted))).validate()
            assert len(report.failures) == 1
            failure = report.failures[0]
            assert failure.record_kind == kind
            if kind == "SENSOR_PAYLOAD":
                assert failure.sensor == registry[sensor_idx].id
                assert failure.frame_index == frame_idx

    def test_reports_expected_and_actual(self, small):
        meta, frames, blob = small
        target = [r for r in oracles.parse_records(blob) if r[0] == "SENSOR_PAYLOAD"][0]
        corrupted = bytearray(blob)
        corrupted[target[3]] ^= 0x01
        failure = open_dataset(io.BytesIO(bytes(corrupted))).validate().failures[0]
        assert failure.expected_checksum == target[5]
        assert failure.actual_checksum == oracles.crc32c_reference(
            bytes(corrupted[target[3] : target[3] + target[4]])
        )


class TestRoundTripProperty:
    def test_many_random_datasets(self):
        for seed in range(25):
            rng = np.random.default_rng(seed)
            meta, frames = fixtures.random_dataset(rng, max_frames=6, max_points=200)
            blob = build_bytes(meta, frames)
            reader = open_dataset(io.BytesIO(blob))
            assert reader.meta.approx_equal(meta)
            assert list(reader.stream_frames()) == frames

    def test_meta_json_round_trip(self, rng):
        meta = fixtures.make_meta(rng=rng)  # the full fleet
        again = meta_from_json(meta_to_json(meta))
        assert again.approx_equal(meta)
        # canonical serialization is deterministic for a given value
        assert meta_to_json(meta) == meta_to_json(meta)
        assert meta_to_json(again) == meta_to_json(again)
