"""Associate raw timestamped sensor records with 10 Hz trigger instants.

Triggered sensors (vehicle cameras and LiDARs, tower cameras) attach to the
nearest trigger only when within the association tolerance; records farther
out become orphans.  Free-running sensors (the tower solid-state LiDARs,
which cannot be triggered) always attach to the nearest trigger, with their
offset recorded.  INS samples are never frame-assembled: each frame stores
the block of samples inside [reference - period/2, reference + period/2).
At most one record per sensor lands in a frame; the record nearest to the
trigger wins and ties go to the earlier record, so results do not depend on
arrival order.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSamplesError, UnsortedInputError
from .model import CameraImage, Frame, PointCloud

DEFAULT_PERIOD_NS = 100_000_000
DEFAULT_TOLERANCE_NS = 10_000_000  # 10% of the period


@dataclass(frozen=True)
class TriggerModel:
    """Square-wave trigger: instants at phase + k*period for k >= 0."""

    period: int = DEFAULT_PERIOD_NS  # ns
    phase: int = 0                   # ns, timestamp of the first trigger
    duty_cycle: float = 0.5          # informational

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("trigger period must be positive")
        if not 0 < self.duty_cycle < 1:
            raise ValueError("duty cycle must lie in (0, 1)")

    def nearest(self, timestamp: int):
        """(trigger index, trigger instant, signed offset record-minus-trigger).

        Integer arithmetic throughout: epoch-nanosecond timestamps exceed
        float64's exact range.  Exact half-period ties round up.
        """
        delta = timestamp - self.phase
        k = max(0, (delta + self.period // 2) // self.period)
        instant = self.phase + k * self.period
        return int(k), instant, timestamp - instant


@dataclass(frozen=True)
class AssemblyConfig:
    tolerance: int = DEFAULT_TOLERANCE_NS     # ns
    free_running_sensors: frozenset = frozenset()
    required_sensors: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "free_running_sensors", frozenset(self.free_running_sensors))
        object.__setattr__(self, "required_sensors", frozenset(self.required_sensors))

    def check(self, trigger: TriggerModel):
        if not 0 < self.tolerance < trigger.period / 2:
            raise ValueError("tolerance must lie in (0, period/2)")


@dataclass
class Orphan:
    sensor: object
    timestamp: int
    reason: str


@dataclass
class AssemblyReport:
    frames_built: int = 0
    orphans: list = field(default_factory=list)
    duplicates: list = field(default_factory=list)
    incomplete_frames: list = field(default_factory=list)  # (frame_index, missing)
    free_running_offsets: dict = field(default_factory=dict)  # sensor -> [ns offsets]
    drift_ppm: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "frames_built": self.frames_built,
            "orphans": [
                {"sensor": str(o.sensor), "timestamp": o.timestamp, "reason": o.reason}
                for o in self.orphans
            ],
            "duplicates": [
                {"sensor": str(o.sensor), "timestamp": o.timestamp, "reason": o.reason}
                for o in self.duplicates
            ],
            "incomplete_frames": [
                {"frame_index": i, "missing": sorted(str(s) for s in missing)}
                for i, missing in self.incomplete_frames
            ],
            "free_running_offsets": {
                str(s): offs for s, offs in sorted(
                    self.free_running_offsets.items(), key=lambda kv: str(kv[0])
                )
            },
            "drift_ppm": {
                str(s): v for s, v in sorted(self.drift_ppm.items(), key=lambda kv: str(kv[0]))
            },
        }


def record_timestamp(record) -> int:
    if isinstance(record, CameraImage):
        return record.timestamp
    if isinstance(record, PointCloud):
        return record.frame_timestamp
    raise TypeError(f"not a frame-assemblable record: {type(record).__name__}")


def assemble(records, trigger: TriggerModel, cfg: AssemblyConfig, ins_records=None):
    """Group records into frames; returns (frames, AssemblyReport).

    ``records``: camera images and point clouds, per-sensor nondecreasing in
    timestamp.  ``ins_records``: optional {SensorId: [InsRecord, ...]}, also
    sorted.  Output frames are renumbered 0..n-1 in trigger order; each
    frame's reference timestamp is its trigger instant.
    """
    cfg.check(trigger)
    report = AssemblyReport()

    last_ts = {}
    # slots[k][sensor] = (record, |offset|, timestamp)
    slots = {}
    for record in records:
        sensor = record.sensor
        ts = record_timestamp(record)
        if sensor in last_ts and ts < last_ts[sensor]:
            raise UnsortedInputError(
                f"{sensor} timestamps decrease at {ts}"
            )
        last_ts[sensor] = ts
        k, _instant, offset = trigger.nearest(ts)
        free_running = sensor in cfg.free_running_sensors
        if not free_running and abs(offset) > cfg.tolerance:
            report.orphans.append(Orphan(sensor, ts, "outside_tolerance"))
            continue
        if free_running:
            report.free_running_offsets.setdefault(sensor, []).append(int(offset))
        slot = slots.setdefault(k, {})
        if sensor in slot:
            incumbent, inc_dist, inc_ts = slot[sensor]
            # Nearest wins; equal distance keeps the earlier record.
            better = abs(offset) < inc_dist or (abs(offset) == inc_dist and ts < inc_ts)
            if better:
                report.duplicates.append(Orphan(sensor, inc_ts, "displaced_by_nearer"))
                slot[sensor] = (record, abs(offset), ts)
            else:
                report.duplicates.append(Orphan(sensor, ts, "farther_duplicate"))
        else:
            slot[sensor] = (record, abs(offset), ts)

    ins_records = ins_records or {}
    for sensor, series in ins_records.items():
        times = [r.timestamp for r in series]
        if any(b < a for a, b in zip(times, times[1:])):
            raise UnsortedInputError(f"{sensor} INS timestamps decrease")

    frames = []
    half = trigger.period // 2
    for out_index, k in enumerate(sorted(slots)):
        instant = trigger.phase + k * trigger.period
        recs = {sensor: entry[0] for sensor, entry in slots[k].items()}
        for sensor, series in ins_records.items():
            block = [r for r in series if instant - half <= r.timestamp < instant + half]
            if block:
                recs[sensor] = block
        completeness = {s: True for s in recs}
        missing = cfg.required_sensors - set(recs)
        for s in missing:
            completeness[s] = False
        if missing:
            report.incomplete_frames.append((out_index, sorted(missing, key=str)))
        frames.append(
            Frame(
                index=out_index,
                reference_timestamp=instant,
                records=recs,
                completeness=completeness,
            )
        )
    report.frames_built = len(frames)
    return frames, report


def drift_report(timestamps_by_sensor, trigger: TriggerModel, min_samples: int = 10):
    """Per-sensor clock drift in parts-per-million of the trigger period.

    Fits a least-squares line to (timestamp - nearest trigger) against the
    trigger index; the slope in ns/frame divided by the period gives ppm.  A
    constant offset therefore reads as 0 ppm.
    """
    out = {}
    for sensor, series in timestamps_by_sensor.items():
        if len(series) < min_samples:
            raise InsufficientSamplesError(
                f"{sensor}: {len(series)} samples, need {min_samples}"
            )
        ks = []
        residuals = []
        for ts in series:
            k, _instant, offset = trigger.nearest(ts)
            ks.append(k)
            residuals.append(offset)
        slope = np.polyfit(np.array(ks, dtype=np.float64),
                           np.array(residuals, dtype=np.float64), 1)[0]
        out[sensor] = float(slope) / trigger.period * 1e6
    return out
