"""Dataset metadata as canonical JSON (sorted keys, no insignificant
whitespace, UTF-8) so the metadata checksum is deterministic.  Unknown keys
are ignored on load, which is what lets a v1.0 reader open v1.x files."""

import json

import numpy as np

from ..model import (
    Agent,
    CameraIntrinsics,
    DatasetMeta,
    Modality,
    RigidTransform,
    SensorId,
    SensorSpec,
)


def sensor_key(sid: SensorId) -> str:
    return f"{sid.agent.value}/{sid.name}"


def meta_to_dict(meta: DatasetMeta) -> dict:
    return {
        "format_version": list(meta.format_version),
        "data_drop_id": meta.data_drop_id,
        "agents": [a.value for a in meta.agents],
        "creation_time": meta.creation_time,
        "sensor_registry": [
            {
                "agent": spec.id.agent.value,
                "name": spec.id.name,
                "modality": spec.id.modality.value,
                "resolution": list(spec.resolution),
                "frequency": spec.frequency,
                "hfov": spec.hfov,
                "vfov": spec.vfov,
                "details": dict(spec.details),
            }
            for spec in meta.sensor_registry
        ],
        "intrinsics": {
            sensor_key(sid): {
                "fx": intr.fx,
                "fy": intr.fy,
                "cx": intr.cx,
                "cy": intr.cy,
                "distortion": [float(v) for v in intr.distortion],
                "width": intr.width,
                "height": intr.height,
            }
            for sid, intr in meta.intrinsics.items()
        },
        "calibration": {
            sensor_key(sid): {
                "rotation_xyzw": [float(v) for v in t.quaternion()],
                "translation": [float(v) for v in t.translation],
            }
            for sid, t in meta.calibration.items()
        },
    }


def meta_to_json(meta: DatasetMeta) -> bytes:
    return canonical_json(meta_to_dict(meta))


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def meta_from_json(data: bytes) -> DatasetMeta:
    doc = json.loads(data.decode("utf-8"))
    registry = []
    for entry in doc.get("sensor_registry", []):
        sid = SensorId(
            agent=Agent(entry["agent"]),
            name=entry["name"],
            modality=Modality(entry["modality"]),
        )
        registry.append(
            SensorSpec(
                id=sid,
                resolution=tuple(entry["resolution"]),
                frequency=entry["frequency"],
                hfov=entry["hfov"],
                vfov=entry["vfov"],
                details=entry.get("details", {}),
            )
        )
    by_key = {sensor_key(spec.id): spec.id for spec in registry}
    intrinsics = {}
    for key, d in doc.get("intrinsics", {}).items():
        intrinsics[by_key[key]] = CameraIntrinsics(
            fx=d["fx"],
            fy=d["fy"],
            cx=d["cx"],
            cy=d["cy"],
            distortion=np.array(d["distortion"], dtype=np.float64),
            width=d["width"],
            height=d["height"],
        )
    calibration = {}
    for key, d in doc.get("calibration", {}).items():
        calibration[by_key[key]] = RigidTransform.from_quaternion(
            d["rotation_xyzw"], d["translation"]
        )
    return DatasetMeta(
        format_version=tuple(doc["format_version"]),
        data_drop_id=doc.get("data_drop_id", ""),
        agents=tuple(Agent(a) for a in doc.get("agents", [])),
        sensor_registry=tuple(registry),
        intrinsics=intrinsics,
        calibration=calibration,
        creation_time=doc.get("creation_time", 0),
    )
