"""Vehicle positions per slot, from a CSV trace or a synthetic generator.

Trace files carry one sample per line with a header::

    slot,vehicle,position,speed
    0,veh-1,12.5,14.0

``speed`` is signed by travel direction (negative for backward traffic).
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Protocol

import numpy as np

from .topology import Direction

TRACE_HEADER = ("slot", "vehicle", "position", "speed")


class TraceError(ValueError):
    """Malformed or discontinuous trace input."""


class TraceSample(NamedTuple):
    slot: int
    vehicle: str
    position: float
    speed: float


class TrajectoryWindow:
    """The last ``capacity`` samples of one vehicle, newest last."""

    def __init__(self, vehicle: str, capacity: int = 10):
        if capacity < 1:
            raise ValueError("window capacity must be >= 1")
        self.vehicle = vehicle
        self.capacity = capacity
        self.samples: deque = deque(maxlen=capacity)

    def push(self, sample: TraceSample) -> None:
        if self.samples and sample.slot != self.samples[-1].slot + 1:
            raise TraceError(
                f"vehicle {self.vehicle}: slot {sample.slot} does not follow {self.samples[-1].slot}"
            )
        self.samples.append(sample)

    @property
    def latest(self) -> TraceSample:
        return self.samples[-1]

    def positions(self) -> List[float]:
        return [s.position for s in self.samples]

    def __len__(self):
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, TrajectoryWindow):
            return NotImplemented
        return self.vehicle == other.vehicle and list(self.samples) == list(other.samples)


def predict_speed(window: TrajectoryWindow, tau: float, slot_duration: float) -> float:
    """Mean signed speed over the next ``tau`` seconds.

    Least-squares slope of position against time over the window, so the
    mean speed over any horizon equals the slope. A single sample falls
    back to its instantaneous speed.
    """
    n = len(window)
    if n == 0:
        raise ValueError("cannot predict from an empty window")
    if n == 1:
        return float(window.latest.speed)
    t = np.array([s.slot for s in window.samples], dtype=np.float64) * slot_duration
    x = np.array(window.positions(), dtype=np.float64)
    tc = t - t.mean()
    return float(np.dot(tc, x - x.mean()) / np.dot(tc, tc))


class SpeedPredictor(Protocol):
    def __call__(self, window: TrajectoryWindow, tau: float, slot_duration: float) -> float: ...


# --------------------------------------------------------------------------
# Sources
# --------------------------------------------------------------------------


@dataclass
class VehicleMeta:
    endpoint_id: str
    direction: Direction


class MobilitySource(Protocol):
    def advance(self, slot: int) -> List[TraceSample]: ...

    def meta(self, endpoint_id: str) -> VehicleMeta: ...


class TraceMobility:
    """Replays pre-recorded samples; each vehicle must be present in consecutive slots."""

    def __init__(self, samples: Iterable[TraceSample], v_max: Optional[float] = None,
                 slot_duration: Optional[float] = None):
        by_slot: Dict[int, List[TraceSample]] = {}
        last: Dict[str, TraceSample] = {}
        self._meta: Dict[str, VehicleMeta] = {}
        ordered = sorted(samples, key=lambda s: (s.slot, s.vehicle))
        for s in ordered:
            prev = last.get(s.vehicle)
            if prev is not None:
                if s.slot == prev.slot:
                    raise TraceError(f"vehicle {s.vehicle}: duplicate sample in slot {s.slot}")
                if s.slot != prev.slot + 1:
                    raise TraceError(
                        f"vehicle {s.vehicle}: missing slot {prev.slot + 1} (next sample at slot {s.slot})"
                    )
                if v_max is not None and slot_duration is not None:
                    if abs(s.position - prev.position) > v_max * slot_duration + 1e-9:
                        raise TraceError(
                            f"vehicle {s.vehicle}: jump of {abs(s.position - prev.position):.3f} m "
                            f"at slot {s.slot} exceeds v_max*slot"
                        )
            else:
                direction = Direction.BACKWARD if s.speed < 0 else Direction.FORWARD
                self._meta[s.vehicle] = VehicleMeta(s.vehicle, direction)
            last[s.vehicle] = s
            by_slot.setdefault(s.slot, []).append(s)
        self._by_slot = by_slot
        self.last_slot = max(by_slot) if by_slot else -1

    @classmethod
    def from_csv(cls, path, **kwargs) -> "TraceMobility":
        return cls(read_trace(path), **kwargs)

    def advance(self, slot: int) -> List[TraceSample]:
        return list(self._by_slot.get(slot, ()))

    def meta(self, endpoint_id: str) -> VehicleMeta:
        return self._meta[endpoint_id]


def read_trace(path) -> List[TraceSample]:
    samples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACE_HEADER:
            raise TraceError(f"{path}: expected header {','.join(TRACE_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise TraceError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                samples.append(TraceSample(int(row[0]), row[1].strip(), float(row[2]), float(row[3])))
            except ValueError as exc:
                raise TraceError(f"{path}:{lineno}: {exc}") from None
    return samples


def write_trace(path, samples: Iterable[TraceSample]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for s in samples:
            w.writerow([s.slot, s.vehicle, repr(float(s.position)), repr(float(s.speed))])


@dataclass
class SyntheticConfig:
    """Parameters of the synthetic traffic generator (speeds in m/s)."""

    arrival_rate: float = 0.1  # vehicles per slot per road end (Poisson)
    initial_density: float = 0.01  # vehicles per metre per direction at slot 0
    mean_speed: float = 15.0
    speed_spread: float = 4.0  # std of per-vehicle target speed
    reversion: float = 0.3  # OU pull towards the target, per slot
    noise: float = 1.0  # OU innovation std, m/s per slot
    v_min: float = 5.0
    v_max: float = 25.0

    def __post_init__(self):
        if not 0 < self.v_min <= self.v_max:
            raise ValueError("need 0 < v_min <= v_max")
        if self.arrival_rate < 0 or self.initial_density < 0:
            raise ValueError("rates must be non-negative")


@dataclass
class _Car:
    endpoint_id: str
    direction: Direction
    position: float
    speed: float  # magnitude
    target: float


class SyntheticMobility:
    """Ornstein-Uhlenbeck speeds with Poisson arrivals at both road ends.

    Positions advance with the speed held during the slot, so a car at a
    constant 20 m/s moves exactly ``20 * slot_duration`` metres per slot.
    Cars leave once they pass either road end.
    """

    def __init__(self, config: SyntheticConfig, road_length: float, slot_duration: float,
                 rng: np.random.Generator):
        self.config = config
        self.road_length = road_length
        self.slot_duration = slot_duration
        self.rng = rng
        self._cars: Dict[str, _Car] = {}
        self._meta: Dict[str, VehicleMeta] = {}
        self._serial = 0
        self._slot = -1

    def _new_car(self, direction: Direction, position: float) -> None:
        c = self.config
        target = float(np.clip(self.rng.normal(c.mean_speed, c.speed_spread), c.v_min, c.v_max))
        self._serial += 1
        tag = "f" if direction is Direction.FORWARD else "b"
        eid = f"v{self._serial:06d}{tag}"
        self._cars[eid] = _Car(eid, direction, position, target, target)
        self._meta[eid] = VehicleMeta(eid, direction)

    def add_vehicle(self, endpoint_id: str, direction, position: float, speed: float) -> None:
        """Insert a car with a fixed target speed (its OU process starts at the target)."""
        direction = Direction.parse(direction)
        self._cars[endpoint_id] = _Car(endpoint_id, direction, position, speed, speed)
        self._meta[endpoint_id] = VehicleMeta(endpoint_id, direction)

    def advance(self, slot: int) -> List[TraceSample]:
        if slot != self._slot + 1:
            raise ValueError(f"synthetic mobility expected slot {self._slot + 1}, got {slot}")
        c = self.config
        if slot == 0:
            for direction in (Direction.FORWARD, Direction.BACKWARD):
                n = self.rng.poisson(c.initial_density * self.road_length)
                for x in np.sort(self.rng.uniform(0.0, self.road_length, size=n)):
                    self._new_car(direction, float(x))
        else:
            gone = []
            for car in self._cars.values():
                car.position += int(car.direction) * car.speed * self.slot_duration
                if not 0.0 <= car.position <= self.road_length:
                    gone.append(car.endpoint_id)
                    continue
                if c.noise > 0 or c.reversion > 0:
                    step = c.reversion * (car.target - car.speed)
                    if c.noise > 0:
                        step += c.noise * self.rng.standard_normal()
                    car.speed = min(max(car.speed + step, c.v_min), c.v_max)
            for eid in gone:
                del self._cars[eid]
            n_fwd = self.rng.poisson(c.arrival_rate)
            n_bwd = self.rng.poisson(c.arrival_rate)
            for _ in range(n_fwd):
                self._new_car(Direction.FORWARD, 0.0)
            for _ in range(n_bwd):
                self._new_car(Direction.BACKWARD, self.road_length)
        self._slot = slot
        return [
            TraceSample(slot, car.endpoint_id, car.position, int(car.direction) * car.speed)
            for car in self._cars.values()
        ]

    def meta(self, endpoint_id: str) -> VehicleMeta:
        return self._meta[endpoint_id]

    def record(self, n_slots: int) -> List[TraceSample]:
        """Run the generator for ``n_slots`` slots and return every sample."""
        out = []
        for t in range(self._slot + 1, self._slot + 1 + n_slots):
            out.extend(self.advance(t))
        return out
