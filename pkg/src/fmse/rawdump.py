"""Raw capture dumps: the JSON side-format consumed by ``fmse assemble``.

A dump carries dataset metadata, the trigger model, association settings,
and unassembled sensor records.  Binary payloads ride as base64 of the
container's native encodings (pixel buffers, 24-byte point structs, 112-byte
INS records), so a dump round-trips bit-exactly into a .4mse file.
"""

import base64
import json

import numpy as np

from .assembler import AssemblyConfig, TriggerModel
from .codec.format import INS_DTYPE
from .codec.metadata import canonical_json, meta_from_json, meta_to_dict, sensor_key
from .model import POINT_DTYPE, CameraImage, Encoding, InsRecord, PointCloud


def raw_dump_dict(meta, records, ins_series=None, trigger=None, config=None) -> dict:
    trigger = trigger or TriggerModel()
    config = config or AssemblyConfig()
    out = {
        "meta": meta_to_dict(meta),
        "trigger": {
            "period_ns": trigger.period,
            "phase_ns": trigger.phase,
            "duty_cycle": trigger.duty_cycle,
        },
        "assembly": {
            "tolerance_ns": config.tolerance,
            "free_running": sorted(str(s) for s in config.free_running_sensors),
            "required": sorted(str(s) for s in config.required_sensors),
        },
        "records": [],
    }
    for record in records:
        if isinstance(record, CameraImage):
            out["records"].append(
                {
                    "sensor": sensor_key(record.sensor),
                    "kind": "image",
                    "timestamp": record.timestamp,
                    "width": record.width,
                    "height": record.height,
                    "encoding": record.encoding.value,
                    "exposure_us": record.exposure_us,
                    "pixels_b64": base64.b64encode(record.pixels).decode("ascii"),
                }
            )
        elif isinstance(record, PointCloud):
            out["records"].append(
                {
                    "sensor": sensor_key(record.sensor),
                    "kind": "pointcloud",
                    "timestamp": record.frame_timestamp,
                    "points_b64": base64.b64encode(record.points.tobytes()).decode("ascii"),
                }
            )
        else:
            raise TypeError(f"not a raw record: {type(record).__name__}")
    for sid, series in (ins_series or {}).items():
        block = np.zeros(len(series), dtype=INS_DTYPE)
        for i, r in enumerate(series):
            block[i] = (
                r.timestamp, r.latitude, r.longitude, r.altitude,
                r.orientation[0], r.orientation[1], r.orientation[2], r.orientation[3],
                r.velocity[0], r.velocity[1], r.velocity[2],
                r.angular_rate[0], r.angular_rate[1], r.angular_rate[2],
            )
        out["records"].append(
            {
                "sensor": sensor_key(sid),
                "kind": "ins",
                "records_b64": base64.b64encode(block.tobytes()).decode("ascii"),
            }
        )
    return out


def write_raw_dump(path, meta, records, ins_series=None, trigger=None, config=None):
    doc = raw_dump_dict(meta, records, ins_series, trigger, config)
    with open(path, "wb") as f:
        f.write(canonical_json(doc))
        f.write(b"\n")


def load_raw_dump(path):
    """Returns (meta, records, ins_series, trigger, config)."""
    with open(path, "rb") as f:
        doc = json.load(f)
    meta = meta_from_json(canonical_json(doc["meta"]))
    by_key = {sensor_key(spec.id): spec.id for spec in meta.sensor_registry}
    trigger = TriggerModel(
        period=doc["trigger"]["period_ns"],
        phase=doc["trigger"]["phase_ns"],
        duty_cycle=doc["trigger"].get("duty_cycle", 0.5),
    )
    config = AssemblyConfig(
        tolerance=doc["assembly"]["tolerance_ns"],
        free_running_sensors=frozenset(
            by_key[k] for k in doc["assembly"].get("free_running", [])
        ),
        required_sensors=frozenset(
            by_key[k] for k in doc["assembly"].get("required", [])
        ),
    )
    records = []
    ins_series = {}
    for entry in doc["records"]:
        sid = by_key[entry["sensor"]]
        if entry["kind"] == "image":
            records.append(
                CameraImage(
                    sensor=sid,
                    timestamp=entry["timestamp"],
                    width=entry["width"],
                    height=entry["height"],
                    encoding=Encoding(entry["encoding"]),
                    pixels=base64.b64decode(entry["pixels_b64"]),
                    exposure_us=entry.get("exposure_us", 0),
                )
            )
        elif entry["kind"] == "pointcloud":
            points = np.frombuffer(
                base64.b64decode(entry["points_b64"]), dtype=POINT_DTYPE
            )
            records.append(PointCloud(sid, entry["timestamp"], points))
        elif entry["kind"] == "ins":
            block = np.frombuffer(
                base64.b64decode(entry["records_b64"]), dtype=INS_DTYPE
            )
            ins_series.setdefault(sid, []).extend(
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
            )
        else:
            raise ValueError(f"unknown record kind {entry['kind']!r}")
    return meta, records, ins_series, trigger, config
