"""Independent reference implementations used to cross-check the library.

Everything here is deliberately written from the definitions (bit-by-bit
CRC, homogeneous 4x4 products, per-point projection loops, exhaustive hull
enumeration, brute-force trigger association) and shares no code with the
package.
"""

import struct

import numpy as np

# -- CRC-32C, bit by bit -------------------------------------------------------

_CRC_POLY = 0x82F63B78


def crc32c_reference(data: bytes, crc: int = 0) -> int:
    crc ^= 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ _CRC_POLY if crc & 1 else crc >> 1
    return crc ^ 0xFFFFFFFF


# -- homogeneous-matrix transform oracle ----------------------------------------


def mat44(rotation, translation) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = rotation
    m[:3, 3] = translation
    return m


def compose44(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b


def invert44(a: np.ndarray) -> np.ndarray:
    return np.linalg.inv(a)


def apply44(m: np.ndarray, p) -> np.ndarray:
    q = m @ np.append(np.asarray(p, dtype=np.float64), 1.0)
    return q[:3]


# -- projection: multiply-then-divide, one point at a time -----------------------


def project_reference(points, cam_from_lidar44, fx, fy, cx, cy, width, height,
                      distortion=None):
    """List of (u, v, depth, index) for points that survive z>eps and bounds."""
    out = []
    for i, p in enumerate(points):
        q = cam_from_lidar44 @ np.array([p[0], p[1], p[2], 1.0])
        z = q[2]
        if z <= 1e-6:
            continue
        x, y = q[0] / z, q[1] / z
        if distortion is not None:
            x, y = distort_reference(x, y, distortion)
        u = fx * x + cx
        v = fy * y + cy
        if 0 <= u < width and 0 <= v < height:
            out.append((u, v, z, i))
    return out


def distort_reference(x, y, d):
    k1, k2, p1, p2, k3 = d
    r2 = x * x + y * y
    f = 1 + k1 * r2 + k2 * r2 ** 2 + k3 * r2 ** 3
    xd = x * f + 2 * p1 * x * y + p2 * (r2 + 2 * x * x)
    yd = y * f + p1 * (r2 + 2 * y * y) + 2 * p2 * x * y
    return xd, yd


# -- bilinear sampling, per pixel -------------------------------------------------


def bilinear_reference(src, x, y):
    """Sample one channel image at (x, y); None when outside [0,w-1]x[0,h-1]."""
    h, w = src.shape[:2]
    if not (0 <= x <= w - 1 and 0 <= y <= h - 1):
        return None
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    x0, y0 = min(x0, w - 2) if w > 1 else 0, min(y0, h - 2) if h > 1 else 0
    fx, fy = x - x0, y - y0
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    return (
        src[y0, x0] * (1 - fx) * (1 - fy)
        + src[y0, x1] * fx * (1 - fy)
        + src[y1, x0] * (1 - fx) * fy
        + src[y1, x1] * fx * fy
    )


# -- exhaustive convex hull -------------------------------------------------------


def brute_hull(points, rel_tol=1e-9):
    """(vertex index set, facet triple set) by enumerating all point triples.

    A triple is a hull facet when every point lies on one side of its plane.
    Tolerances scale with the data (signed volumes grow as extent^3, so an
    absolute epsilon would be meaningless); assumes general position.
    Vectorized inner test so n=200 stays fast.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    extent = float(np.ptp(pts, axis=0).max())
    side_tol = rel_tol * extent**3
    normal_tol = rel_tol * extent**2
    vertices = set()
    facets = set()
    idx = np.arange(n)
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            base = pts[i]
            edge = pts[j] - base
            normals = np.cross(edge, pts[j + 1:] - base)  # candidates k > j
            # side[m, k] = signed volume of (i, j, k, m)
            side = (pts - base) @ normals.T
            ks = idx[j + 1:]
            pos = (side > side_tol).any(axis=0)
            neg = (side < -side_tol).any(axis=0)
            good = ~(pos & neg)
            good &= np.linalg.norm(normals, axis=1) > normal_tol
            for k in ks[good]:
                facets.add((i, j, int(k)))
                vertices.update((i, j, int(k)))
    return vertices, facets


def brute_hpr(points, viewpoint, radius):
    """Visible index set: flip each point, then exhaustive hull membership."""
    pts = np.asarray(points, dtype=np.float64)
    viewpoint = np.asarray(viewpoint, dtype=np.float64)
    flipped = []
    for p in pts:
        rel = p - viewpoint
        d = np.linalg.norm(rel)
        flipped.append(p + 2 * (radius - d) * rel / d)
    allpts = np.vstack([flipped, viewpoint[None, :]])
    vertices, _ = brute_hull(allpts)
    return {i for i in vertices if i < len(pts)}


# -- brute-force trigger association ----------------------------------------------


def assemble_reference(stamps, phase, period, tolerance, free_running=False,
                       max_index=10_000):
    """Map trigger index -> winning record position, plus orphan positions.

    Scans every candidate trigger for every stamp; nearest wins, ties to the
    earlier record.
    """
    assignments = {}
    orphans = []
    duplicates = []
    for pos, ts in enumerate(stamps):
        best = None
        for k in range(0, max_index):
            d = abs(ts - (phase + k * period))
            if best is None or d < best[1]:
                best = (k, d)
        k, dist = best
        if not free_running and dist > tolerance:
            orphans.append(pos)
            continue
        if k in assignments:
            prev_pos, prev_dist = assignments[k]
            if dist < prev_dist or (dist == prev_dist and ts < stamps[prev_pos]):
                duplicates.append(prev_pos)
                assignments[k] = (pos, dist)
            else:
                duplicates.append(pos)
        else:
            assignments[k] = (pos, dist)
    return assignments, orphans, duplicates


# -- independent .4mse record walker (layout per FORMAT.md) ------------------------

_RECORD_HEADER = struct.Struct("<BHBBQI")
_FILE_HEADER = struct.Struct("<4sHHQI")

RECORD_KINDS = {1: "FRAME_START", 2: "SENSOR_PAYLOAD", 3: "FRAME_END", 4: "INDEX", 5: "FOOTER"}


def parse_records(blob: bytes):
    """[(kind, frame_index, sensor_idx, payload_offset, payload_len, crc)] from
    raw file bytes, implemented straight off the byte-layout documentation."""
    magic, _maj, _min, meta_len, _meta_crc = _FILE_HEADER.unpack_from(blob, 0)
    assert magic == b"4MSE"
    pos = _FILE_HEADER.size + meta_len
    out = []
    current_frame = None
    while pos < len(blob):
        kind, sensor_idx, _ptype, _flags, length, crc = _RECORD_HEADER.unpack_from(blob, pos)
        payload_off = pos + _RECORD_HEADER.size
        if RECORD_KINDS[kind] == "FRAME_START":
            current_frame = struct.unpack_from("<Q", blob, payload_off)[0]
        frame = current_frame if RECORD_KINDS[kind] in ("FRAME_START", "SENSOR_PAYLOAD", "FRAME_END") else None
        out.append((RECORD_KINDS[kind], frame, sensor_idx, payload_off, length, crc))
        pos = payload_off + length
    assert pos == len(blob)
    return out
