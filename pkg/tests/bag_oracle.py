"""Minimal independent rosbag v2.0 reader, written against the public on-disk
record layout (op codes 0x02-0x07, length-prefixed name=value headers).  Used
only to verify exported bags; shares nothing with the exporter."""

import struct
from dataclasses import dataclass, field

VERSION_LINE = b"#ROSBAG V2.0\n"


def _parse_fields(blob):
    fields = {}
    pos = 0
    while pos < len(blob):
        (length,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        entry = blob[pos : pos + length]
        pos += length
        name, _, value = entry.partition(b"=")
        fields[name.decode("ascii")] = value
    return fields


def _records(blob):
    pos = 0
    while pos < len(blob):
        (hlen,) = struct.unpack_from("<I", blob, pos)
        header = _parse_fields(blob[pos + 4 : pos + 4 + hlen])
        pos += 4 + hlen
        (dlen,) = struct.unpack_from("<I", blob, pos)
        data = blob[pos + 4 : pos + 4 + dlen]
        pos += 4 + dlen
        yield header, data
    assert pos == len(blob), "record ran past end of section"


def _u32(b):
    return struct.unpack("<I", b)[0]


def _u64(b):
    return struct.unpack("<Q", b)[0]


def _ros_time_ns(b):
    secs, nsecs = struct.unpack("<II", b)
    return secs * 1_000_000_000 + nsecs


@dataclass
class Connection:
    conn: int
    topic: str
    msg_type: str
    md5sum: str
    latching: bool = False


@dataclass
class Message:
    conn: int
    time_ns: int
    raw: bytes


@dataclass
class Bag:
    index_pos: int
    conn_count: int
    chunk_count: int
    connections: dict = field(default_factory=dict)  # conn id -> Connection
    messages: list = field(default_factory=list)
    chunk_infos: list = field(default_factory=list)

    def by_topic(self):
        out = {}
        for m in self.messages:
            out.setdefault(self.connections[m.conn].topic, []).append(m)
        return out


def read_bag(blob: bytes) -> Bag:
    assert blob[: len(VERSION_LINE)] == VERSION_LINE, "missing version line"
    records = list(_records(blob[len(VERSION_LINE) :]))
    assert records, "no bag header record"
    header, _pad = records[0]
    assert header["op"] == b"\x03"
    bag = Bag(
        index_pos=_u64(header["index_pos"]),
        conn_count=_u32(header["conn_count"]),
        chunk_count=_u32(header["chunk_count"]),
    )
    for header, data in records[1:]:
        op = header["op"][0]
        if op == 0x07:
            _add_connection(bag, header, data)
        elif op == 0x05:
            assert header["compression"] == b"none"
            assert _u32(header["size"]) == len(data)
            for chead, cdata in _records(data):
                cop = chead["op"][0]
                if cop == 0x07:
                    _add_connection(bag, chead, cdata)
                elif cop == 0x02:
                    bag.messages.append(
                        Message(
                            conn=_u32(chead["conn"]),
                            time_ns=_ros_time_ns(chead["time"]),
                            raw=cdata,
                        )
                    )
                else:
                    raise AssertionError(f"unexpected op {cop} inside chunk")
        elif op == 0x06:
            entries = [
                struct.unpack_from("<II", data, i * 8) for i in range(len(data) // 8)
            ]
            bag.chunk_infos.append(
                {
                    "chunk_pos": _u64(header["chunk_pos"]),
                    "start_ns": _ros_time_ns(header["start_time"]),
                    "end_ns": _ros_time_ns(header["end_time"]),
                    "counts": dict(entries),
                }
            )
        elif op == 0x04:
            pass  # index data: positions checked via chunk re-parse above
        else:
            raise AssertionError(f"unexpected top-level op {op}")
    return bag


def _add_connection(bag, header, data):
    conn = _u32(header["conn"])
    fields = _parse_fields(data)
    record = Connection(
        conn=conn,
        topic=fields["topic"].decode(),
        msg_type=fields["type"].decode(),
        md5sum=fields["md5sum"].decode(),
        latching=fields.get("latching") == b"1",
    )
    if conn in bag.connections:
        assert bag.connections[conn] == record, "conflicting connection records"
    bag.connections[conn] = record


# -- message deserializers -----------------------------------------------------


class _Cursor:
    def __init__(self, blob):
        self.blob = blob
        self.pos = 0

    def take(self, fmt):
        vals = struct.unpack_from(fmt, self.blob, self.pos)
        self.pos += struct.calcsize(fmt)
        return vals if len(vals) > 1 else vals[0]

    def string(self):
        n = self.take("<I")
        s = self.blob[self.pos : self.pos + n].decode("utf-8")
        self.pos += n
        return s

    def bytes_(self):
        n = self.take("<I")
        b = self.blob[self.pos : self.pos + n]
        self.pos += n
        return b

    def header(self):
        seq = self.take("<I")
        secs, nsecs = self.take("<II")
        frame = self.string()
        return {"seq": seq, "stamp_ns": secs * 1_000_000_000 + nsecs, "frame_id": frame}

    def done(self):
        assert self.pos == len(self.blob), "trailing bytes in message"


def parse_image(raw):
    c = _Cursor(raw)
    out = {"header": c.header()}
    out["height"], out["width"] = c.take("<II")
    out["encoding"] = c.string()
    out["is_bigendian"] = c.take("<B")
    out["step"] = c.take("<I")
    out["data"] = c.bytes_()
    c.done()
    return out


def parse_pointcloud(raw):
    c = _Cursor(raw)
    out = {"header": c.header()}
    out["height"], out["width"] = c.take("<II")
    nfields = c.take("<I")
    fields = []
    for _ in range(nfields):
        name = c.string()
        offset, datatype, count = c.take("<IBI")
        fields.append({"name": name, "offset": offset, "datatype": datatype, "count": count})
    out["fields"] = fields
    out["is_bigendian"] = c.take("<B")
    out["point_step"] = c.take("<I")
    out["row_step"] = c.take("<I")
    out["data"] = c.bytes_()
    out["is_dense"] = c.take("<B")
    c.done()
    return out


def parse_odometry(raw):
    c = _Cursor(raw)
    out = {"header": c.header()}
    out["child_frame_id"] = c.string()
    out["position"] = c.take("<3d")
    out["orientation"] = c.take("<4d")
    out["pose_covariance"] = c.take("<36d")
    out["linear"] = c.take("<3d")
    out["angular"] = c.take("<3d")
    out["twist_covariance"] = c.take("<36d")
    c.done()
    return out


def parse_tf(raw):
    c = _Cursor(raw)
    n = c.take("<I")
    transforms = []
    for _ in range(n):
        entry = {"header": c.header(), "child_frame_id": c.string()}
        entry["translation"] = c.take("<3d")
        entry["rotation"] = c.take("<4d")
        transforms.append(entry)
    c.done()
    return transforms
