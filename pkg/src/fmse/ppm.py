"""Binary PPM (P6) output so rendered overlays need no image codec."""

from pathlib import Path

import numpy as np


def write_ppm(sink, pixels: np.ndarray):
    """Write an (h, w, 3) uint8 array as binary PPM."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError("expected an (h, w, 3) array")
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as f:
            write_ppm(f, pixels)
            return
    h, w = pixels.shape[:2]
    sink.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
    sink.write(pixels.tobytes())


def read_ppm(source) -> np.ndarray:
    if isinstance(source, (str, Path)):
        with open(source, "rb") as f:
            return read_ppm(f)
    tokens = []
    while len(tokens) < 4:
        line = source.readline()
        if not line:
            raise ValueError("truncated PPM header")
        body = line.split(b"#", 1)[0]
        tokens.extend(body.split())
    if tokens[0] != b"P6" or tokens[3] != b"255":
        raise ValueError("only 8-bit P6 PPM is supported")
    w, h = int(tokens[1]), int(tokens[2])
    data = source.read(w * h * 3)
    if len(data) != w * h * 3:
        raise ValueError("truncated PPM pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3)
