"""Vehicle and infrastructure digital twins."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .mobility import TraceSample, TrajectoryWindow
from .topology import Direction, Topology


class TwinError(RuntimeError):
    """Broken twin contract (e.g. writing a completed event twice)."""


@dataclass
class OffloadingEvent:
    """One offloaded task as the twin sees it. Delay/discontinuity are write-once."""

    vehicle: str
    gen_slot: int
    location: float
    predicted_speed: float
    rsu: int
    direction: int
    processor: Optional[int] = None
    delivery_rsu: Optional[int] = None
    delay: Optional[float] = None
    discontinuity: Optional[bool] = None

    @property
    def completed(self) -> bool:
        return self.delay is not None

    def complete(self, delay: float, discontinuity: bool) -> None:
        if self.completed:
            raise TwinError(
                f"event ({self.vehicle}, slot {self.gen_slot}) already completed"
            )
        self.delay = float(delay)
        self.discontinuity = bool(discontinuity)

    def as_record(self) -> dict:
        return asdict(self)


class VehicleDigitalTwin:
    def __init__(self, endpoint_id: str, direction: Direction, window_len: int = 10):
        self.endpoint_id = endpoint_id
        self.direction = direction
        self.trajectory = TrajectoryWindow(endpoint_id, window_len)
        self.events: List[OffloadingEvent] = []
        self.current_rloc: Optional[int] = None
        self.future_rloc: Optional[int] = None
        # in-flight events whose delivery RSU differs from the offload RSU
        self._migrating: List[OffloadingEvent] = []

    def sync(self, sample: TraceSample, topology: Topology) -> None:
        self.trajectory.push(sample)
        self.current_rloc = topology.rsu_at(sample.position)

    @property
    def latest(self) -> TraceSample:
        return self.trajectory.latest

    def record_offload(self, slot: int, location: float, predicted_speed: float,
                       delivery_rsu: Optional[int] = None, processor: Optional[int] = None,
                       rsu: Optional[int] = None) -> OffloadingEvent:
        rsu = self.current_rloc if rsu is None else rsu
        event = OffloadingEvent(
            self.endpoint_id, slot, float(location), float(predicted_speed), rsu,
            int(self.direction), processor, delivery_rsu,
        )
        self.events.append(event)
        if delivery_rsu is not None and delivery_rsu != rsu:
            self._migrating.append(event)
            self.future_rloc = delivery_rsu
        return event

    def resolve(self, event: OffloadingEvent, delay: float, discontinuity: bool) -> None:
        event.complete(delay, discontinuity)
        if any(e is event for e in self._migrating):
            self._migrating = [e for e in self._migrating if e is not event]
            self.future_rloc = self._migrating[-1].delivery_rsu if self._migrating else None

    @property
    def has_migrating_task(self) -> bool:
        return bool(self._migrating)


@dataclass
class VehicleStatusMatrix:
    rsu: int
    epoch: int
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def build_status_matrix(rsu: int, epoch: int, events: Sequence[OffloadingEvent],
                        coverage: Tuple[float, float], n_x: int, n_v: int,
                        speed_bounds: Tuple[float, float]) -> VehicleStatusMatrix:
    """Count events by binned location (over the RSU coverage) and |predicted speed|."""
    if any(e.rsu != rsu for e in events):
        raise TwinError(f"status matrix for RSU {rsu} given events of another RSU")
    locs = np.array([e.location for e in events], dtype=np.float64)
    speeds = np.array([e.predicted_speed for e in events], dtype=np.float64)
    counts = kernels.status_counts(locs, speeds, coverage[0], coverage[1],
                                   speed_bounds[0], speed_bounds[1], n_x, n_v)
    return VehicleStatusMatrix(rsu, epoch, counts)


class InfrastructureDigitalTwin:
    def __init__(self, rsu: int, compute_rate: float):
        self.rsu = rsu
        self.compute_rate = compute_rate
        self.status_matrices: List[VehicleStatusMatrix] = []
        self.queue_history: List[float] = []
        self.policy_maps: Dict[int, object] = {}
        self.epoch_events: List[OffloadingEvent] = []

    def snapshot_provision(self, queue, time: float) -> float:
        """Record the edge queue's committed residual work (seconds) at ``time``."""
        q = queue.backlog(time)
        self.queue_history.append(q)
        return q

    def close_epoch(self, epoch: int, coverage, n_x: int, n_v: int, speed_bounds) -> VehicleStatusMatrix:
        m = build_status_matrix(self.rsu, epoch, self.epoch_events, coverage, n_x, n_v, speed_bounds)
        self.status_matrices.append(m)
        self.epoch_events = []
        return m

    @property
    def last_matrix(self) -> Optional[VehicleStatusMatrix]:
        return self.status_matrices[-1] if self.status_matrices else None


def dump_events(path, events: Sequence[OffloadingEvent], epoch: Optional[int] = None) -> None:
    """Append one JSON line per event."""
    with open(path, "a") as fh:
        for e in events:
            rec = e.as_record()
            if epoch is not None:
                rec["epoch"] = epoch
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
