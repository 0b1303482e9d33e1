"""Command-line front end: inspect, validate, render, and convert recordings.

Exit codes are a stable contract: 0 success, 1 integrity failure, 2 usage or
parse failure.  Every subcommand accepts --json for canonical-JSON output;
the FMSE_LOG environment variable (DEBUG/INFO/WARNING/ERROR) controls log
verbosity on stderr.  Outputs depend only on input bytes, never on the
clock, so identical invocations produce identical files.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import assembler, bag, calib, geom, ppm, rawdump
from .codec import open_dataset, write_dataset
from .codec.metadata import sensor_key
from .errors import ChecksumMismatchError, FmseError
from .model import Modality

log = logging.getLogger("fmse")

EXIT_OK = 0
EXIT_INTEGRITY = 1
EXIT_USAGE = 2


def _emit(doc, as_json):
    if as_json:
        print(json.dumps(doc, sort_keys=True, separators=(",", ":")))
        return
    for line in _render_text(doc):
        print(line)


def _render_text(doc, indent=0):
    pad = "  " * indent
    if isinstance(doc, dict):
        for key, value in doc.items():
            if isinstance(value, (dict, list)) and value:
                yield f"{pad}{key}:"
                yield from _render_text(value, indent + 1)
            else:
                yield f"{pad}{key}: {value}"
    elif isinstance(doc, list):
        for value in doc:
            if isinstance(value, (dict, list)):
                yield from _render_text(value, indent + 1)
            else:
                yield f"{pad}- {value}"
    else:
        yield f"{pad}{doc}"


def _find_sensor(meta, token):
    matches = [
        spec.id
        for spec in meta.sensor_registry
        if sensor_key(spec.id) == token or spec.id.name == token
    ]
    if len(matches) != 1:
        raise FmseError(
            f"sensor {token!r} is {'ambiguous' if matches else 'unknown'}"
        )
    return matches[0]


# -- subcommands -----------------------------------------------------------------


def cmd_info(args):
    with open_dataset(args.file) as reader:
        meta = reader.meta
        entries = reader.index_entries or []
        duration = (
            (entries[-1].reference_timestamp - entries[0].reference_timestamp)
            if len(entries) >= 2
            else 0
        )
        doc = {
            "format_version": f"{reader.version[0]}.{reader.version[1]}",
            "data_drop_id": meta.data_drop_id,
            "agents": [a.value for a in meta.agents],
            "frames": reader.frame_count,
            "duration_ns": duration,
            "creation_time": meta.creation_time,
            "sensors": [
                {
                    "sensor": sensor_key(spec.id),
                    "modality": spec.id.modality.value,
                    "resolution": "x".join(str(v) for v in spec.resolution),
                    "frequency_hz": spec.frequency,
                    "hfov_deg": spec.hfov,
                    "vfov_deg": spec.vfov,
                    **(
                        {"details": dict(spec.details)} if spec.details else {}
                    ),
                }
                for spec in meta.sensor_registry
            ],
        }
    _emit(doc, args.json)
    return EXIT_OK


def cmd_validate(args):
    with open_dataset(args.file) as reader:
        report = reader.validate()
    _emit(report.to_dict(), args.json)
    return EXIT_OK if report.ok else EXIT_INTEGRITY


def cmd_stats(args):
    with open_dataset(args.file) as reader:
        per_sensor = {}
        frames = 0
        first_ref = last_ref = None
        for frame in reader.stream_frames():
            frames += 1
            if first_ref is None:
                first_ref = frame.reference_timestamp
            last_ref = frame.reference_timestamp
            for sid, record in frame.records.items():
                stats = per_sensor.setdefault(
                    sensor_key(sid),
                    {"records": 0, "points": 0, "pixels": 0, "samples": 0},
                )
                stats["records"] += 1
                if hasattr(record, "points"):
                    stats["points"] += len(record)
                elif hasattr(record, "pixels"):
                    stats["pixels"] += len(record.pixels)
                else:
                    stats["samples"] += len(record)  # INS samples in the block
        doc = {
            "frames": frames,
            "duration_ns": (last_ref - first_ref) if frames >= 2 else 0,
            "sensors": {
                key: {k: v for k, v in stats.items() if v}
                for key, stats in sorted(per_sensor.items())
            },
        }
    _emit(doc, args.json)
    return EXIT_OK


def cmd_project(args):
    with open_dataset(args.file) as reader:
        meta = reader.meta
        camera = _find_sensor(meta, args.camera)
        lidars = [_find_sensor(meta, token) for token in args.lidar]
        if camera.modality is not Modality.CAMERA:
            raise FmseError(f"{camera} is not a camera")
        if camera not in meta.intrinsics:
            raise FmseError(f"no intrinsics stored for {camera}")
        frame_count = reader.frame_count or 0
        if not 0 <= args.frame < frame_count:
            raise FmseError(f"frame {args.frame} out of range [0, {frame_count})")
        frame = reader.get_frame(args.frame)
        if camera not in frame.records:
            raise FmseError(f"frame {args.frame} has no image for {camera}")
        graph = calib.load_from_meta(meta)
        image = frame.records[camera]
        intr = meta.intrinsics[camera]

        merged = []
        for lidar in lidars:
            if lidar not in frame.records:
                log.warning("frame %d has no cloud for %s", args.frame, lidar)
                continue
            cloud = frame.records[lidar]
            transform = graph.point_map(lidar, camera)
            merged.append(
                geom.project_cloud(cloud, transform, intr, apply_distortion=args.distort)
            )
        projected = (
            np.concatenate(merged) if merged else np.empty(0, dtype=geom.PROJECTED_DTYPE)
        )
        bounds = None
        if args.min_depth is not None and args.max_depth is not None:
            bounds = (args.min_depth, args.max_depth)
        if len(projected):
            colors = geom.colorize_depth(projected["depth"], bounds=bounds)
        else:
            colors = np.empty((0, 3), dtype=np.uint8)
        canvas = geom.render_overlay(image, projected, colors, radius=args.point_radius)
        ppm.write_ppm(args.out, canvas)
    _emit(
        {"out": str(args.out), "points_drawn": int(len(projected))},
        args.json,
    )
    return EXIT_OK


def cmd_export(args):
    with open_dataset(args.file) as reader:
        topics = None
        if args.topics:
            with open(args.topics, "rb") as f:
                doc = json.load(f)
            by_key = {sensor_key(s.id): s.id for s in reader.meta.sensor_registry}
            topics = bag.TopicMap(
                topics={by_key[k]: v for k, v in doc["topics"].items()},
                calibration_topic=doc.get("calibration_topic", "/tf_static"),
            )
        elif args.no_calibration:
            topics = bag.default_topic_map(reader.meta)
            topics.calibration_topic = None
        summary = bag.export_bag(reader, topics, args.bag)
    _emit(summary.to_dict(), args.json)
    return EXIT_OK


def cmd_assemble(args):
    meta, records, ins_series, trigger, config = rawdump.load_raw_dump(args.dump)
    if args.tolerance is not None:
        config = assembler.AssemblyConfig(
            tolerance=args.tolerance,
            free_running_sensors=config.free_running_sensors,
            required_sensors=config.required_sensors,
        )
    frames, report = assembler.assemble(records, trigger, config, ins_series)
    write_dataset(meta, frames, args.out)
    _emit(report.to_dict(), args.json)
    return EXIT_OK


# -- entry point -------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fmse",
        description="Inspect, validate, render, and convert .4mse recordings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        p.add_argument("--json", action="store_true", help="canonical JSON output")
        return p

    p = add("info", cmd_info, "summarize a recording")
    p.add_argument("file")

    p = add("validate", cmd_validate, "recompute every checksum")
    p.add_argument("file")

    p = add("stats", cmd_stats, "per-sensor record statistics")
    p.add_argument("file")

    p = add("project", cmd_project, "render a LiDAR overlay as binary PPM")
    p.add_argument("file")
    p.add_argument("--frame", type=int, required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--lidar", action="append", required=True,
                   help="repeatable; clouds are merged as one overlay")
    p.add_argument("--out", required=True)
    p.add_argument("--distort", action="store_true",
                   help="apply the lens model to projected points")
    p.add_argument("--min-depth", type=float, default=None)
    p.add_argument("--max-depth", type=float, default=None)
    p.add_argument("--point-radius", type=int, default=1)

    p = add("export", cmd_export, "convert to a rosbag v2.0 file")
    p.add_argument("file")
    p.add_argument("--bag", required=True)
    p.add_argument("--topics", default=None, help="JSON topic-map file")
    p.add_argument("--no-calibration", action="store_true",
                   help="skip the latched calibration topic")

    p = add("assemble", cmd_assemble, "build a .4mse file from a raw dump")
    p.add_argument("dump")
    p.add_argument("--out", required=True)
    p.add_argument("--tolerance", type=int, default=None,
                   help="association tolerance override, ns")
    return parser


def main(argv=None):
    level = os.environ.get("FMSE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ChecksumMismatchError as e:
        log.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (FmseError, OSError, ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
