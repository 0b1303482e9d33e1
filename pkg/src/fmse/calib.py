"""Per-agent registry of sensor-to-root extrinsics.

Each agent's TOP LiDAR is the root of its subgraph; its entry is the
identity.  A stored transform T_X carries points from sensor X's frame into
the root frame.  For two sensors B and C registered under the same agent,

    between(B, C) = T_B @ T_C^-1

is the root-referenced pair transform.  With B the agent root this is
exactly the map taking root-frame points into C's frame, which is the form
LiDAR-to-camera projection consumes; for two arbitrary sensors the rigorous
coordinate re-expression is :meth:`CalibrationGraph.point_map`.  There is no
vehicle-to-tower edge: global registration of the two agents is left to the
consumer (raw GNSS/INS records are available for it).
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    CrossAgentError,
    MissingRootError,
    NonIdentityRootError,
    UnregisteredSensorError,
)
from .model import ROOT_SENSOR_NAME, DatasetMeta, RigidTransform, SensorId


@dataclass
class ConsistencyReport:
    pairs_checked: int
    max_residual: float


class CalibrationGraph:
    """Mutable while being built; treat as read-only once populated."""

    def __init__(self, roots=None):
        self._to_root = {}  # SensorId -> RigidTransform
        # Agent -> root sensor name; default designation is the TOP LiDAR.
        self._roots = dict(roots) if roots else {a: n for a, n in ROOT_SENSOR_NAME.items()}
        self.change_log = []

    def root_name(self, agent) -> str:
        return self._roots[agent]

    def register(self, sensor: SensorId, to_root: RigidTransform):
        """Add or overwrite one sensor-to-root transform.  The per-agent root
        sensor may only carry the identity.  Last write wins; overwrites are
        noted in ``change_log``."""
        if sensor.name == self._roots[sensor.agent]:
            if not to_root.approx_equal(RigidTransform.identity(), 1e-12):
                raise NonIdentityRootError(
                    f"root sensor {sensor} must map to the identity"
                )
        if sensor in self._to_root:
            self.change_log.append(f"replaced {sensor}")
        self._to_root[sensor] = to_root
        return self

    def sensors(self):
        return sorted(self._to_root, key=str)

    def to_root(self, sensor: SensorId) -> RigidTransform:
        try:
            return self._to_root[sensor]
        except KeyError:
            raise UnregisteredSensorError(f"{sensor} is not registered") from None

    def between(self, from_sensor: SensorId, to_sensor: SensorId) -> RigidTransform:
        """Root-referenced pair transform ``T_from @ T_to^-1`` (see module
        docstring for when this is directly a point map)."""
        if from_sensor.agent is not to_sensor.agent:
            raise CrossAgentError(
                f"{from_sensor} and {to_sensor} live under different agents"
            )
        return self.to_root(from_sensor).compose(self.to_root(to_sensor).invert())

    def point_map(self, from_sensor: SensorId, to_sensor: SensorId) -> RigidTransform:
        """Transform carrying points expressed in ``from_sensor``'s frame into
        ``to_sensor``'s frame: ``T_to^-1 @ T_from``.  Coincides with
        ``between(from_sensor, to_sensor)`` whenever ``from_sensor`` is the
        agent root."""
        if from_sensor.agent is not to_sensor.agent:
            raise CrossAgentError(
                f"{from_sensor} and {to_sensor} live under different agents"
            )
        return self.to_root(to_sensor).invert().compose(self.to_root(from_sensor))

    def consistency_check(self) -> ConsistencyReport:
        """Max triangle residual ||between(B,D) - between(B,C) @ between(C,D)||_inf
        over all same-agent triples; near zero by construction, so a large
        value flags numerical damage (e.g. a hand-edited calibration file)."""
        sensors = self.sensors()
        worst = 0.0
        pairs = 0
        for b in sensors:
            for c in sensors:
                if c.agent is not b.agent or c == b:
                    continue
                t_bc = self.between(b, c)
                pairs += 1
                for d in sensors:
                    if d.agent is not b.agent or d in (b, c):
                        continue
                    direct = self.between(b, d)
                    chained = t_bc.compose(self.between(c, d))
                    worst = max(
                        worst, np.abs(direct.matrix() - chained.matrix()).max()
                    )
        return ConsistencyReport(pairs_checked=pairs, max_residual=worst)

    def rerooted(self, new_root: SensorId) -> "CalibrationGraph":
        """Same geometry re-expressed relative to ``new_root`` within its
        agent; every pairwise ``between`` is unchanged."""
        base_inv = self.to_root(new_root).invert()
        roots = dict(self._roots)
        roots[new_root.agent] = new_root.name
        out = CalibrationGraph(roots=roots)
        for sensor, t in self._to_root.items():
            if sensor.agent is new_root.agent:
                out._to_root[sensor] = t.compose(base_inv)
            else:
                out._to_root[sensor] = t
        return out


def load_from_meta(meta: DatasetMeta) -> CalibrationGraph:
    """Build the graph from dataset metadata; every agent present in the
    calibration map must include its root sensor."""
    graph = CalibrationGraph()
    agents = {sid.agent for sid in meta.calibration}
    for agent in agents:
        root_name = ROOT_SENSOR_NAME[agent]
        if not any(
            sid.name == root_name and sid.agent is agent for sid in meta.calibration
        ):
            raise MissingRootError(f"calibration lacks {agent.value}/{root_name}")
    for sid, t in meta.calibration.items():
        graph.register(sid, t)
    return graph


def save_to_meta(graph: CalibrationGraph) -> dict:
    """Calibration map suitable for DatasetMeta.calibration."""
    return {sensor: graph.to_root(sensor) for sensor in graph.sensors()}
