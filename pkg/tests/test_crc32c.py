import numpy as np
import pytest

from fmse.crc32c import crc32c

import oracles


def test_standard_check_value():
    assert crc32c(b"123456789") == 0xE3069283


def test_empty():
    assert crc32c(b"") == 0


def test_matches_bitwise_reference_across_sizes(rng):
    data = rng.integers(0, 256, 300_000, dtype=np.uint8).tobytes()
    for size in (0, 1, 2, 3, 7, 8, 9, 100, 2047, 2048, 2049, 65_535, 65_536, 65_537, 300_000):
        assert crc32c(data[:size]) == oracles.crc32c_reference(data[:size]), size


def test_chaining_equals_whole(rng):
    data = rng.integers(0, 256, 200_000, dtype=np.uint8).tobytes()
    whole = crc32c(data)
    for split in (1, 100, 65_536, 199_999):
        assert crc32c(data[split:], crc32c(data[:split])) == whole


def test_single_bit_flip_always_detected(rng):
    data = bytearray(rng.integers(0, 256, 512, dtype=np.uint8).tobytes())
    reference = crc32c(bytes(data))
    for byte in range(0, 512, 37):
        for bit in range(8):
            data[byte] ^= 1 << bit
            assert crc32c(bytes(data)) != reference
            data[byte] ^= 1 << bit


def test_accepts_memoryview_and_arrays(rng):
    arr = rng.integers(0, 256, 10_000, dtype=np.uint8)
    assert crc32c(arr) == crc32c(arr.tobytes()) == crc32c(memoryview(arr.tobytes()))
