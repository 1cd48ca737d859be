"""Road, RSU and vehicle entities plus the slot/epoch clock."""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple


class TopologyError(ValueError):
    """Raised for an invalid topology or an out-of-road position."""


class Direction(enum.IntEnum):
    FORWARD = 1
    BACKWARD = -1

    @classmethod
    def parse(cls, value) -> "Direction":
        if isinstance(value, Direction):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in ("forward", "fwd", "+", "+1", "1"):
                return cls.FORWARD
            if key in ("backward", "bwd", "-", "-1"):
                return cls.BACKWARD
            raise ValueError(f"unknown direction {value!r}")
        return cls(int(value))

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class RsuConfig:
    """One roadside unit and its edge server.

    ``wired_rates[j]`` is the RSU-to-RSU rate in Gbit/s; the entry for the
    RSU itself is ``math.inf``.
    """

    id: int
    coverage: Tuple[float, float]
    compute_rate: float
    uplink_rate: float
    wired_rates: Tuple[float, ...]

    def __post_init__(self):
        lo, hi = self.coverage
        if not hi > lo:
            raise TopologyError(f"RSU {self.id}: empty coverage {self.coverage}")
        if not self.compute_rate > 0 or not self.uplink_rate > 0:
            raise TopologyError(f"RSU {self.id}: rates must be positive")
        if any(not w > 0 for w in self.wired_rates):
            raise TopologyError(f"RSU {self.id}: wired rates must be positive")
        if self.id < len(self.wired_rates) and not math.isinf(self.wired_rates[self.id]):
            raise TopologyError(f"RSU {self.id}: wired rate to itself must be infinite")

    @property
    def cell_length(self) -> float:
        return self.coverage[1] - self.coverage[0]


@dataclass(frozen=True)
class Topology:
    road_length: float
    rsus: Tuple[RsuConfig, ...]
    slot_duration: float
    slots_per_epoch: int
    _uppers: Tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rsus", tuple(self.rsus))
        if not self.slot_duration > 0:
            raise TopologyError("slot_duration must be positive")
        if self.slots_per_epoch < 1:
            raise TopologyError("slots_per_epoch must be >= 1")
        if not self.rsus:
            raise TopologyError("topology needs at least one RSU")
        expected = 0.0
        for k, rsu in enumerate(self.rsus):
            if rsu.id != k:
                raise TopologyError(f"RSU ids must be 0..N-1 in order, got {rsu.id} at {k}")
            if len(rsu.wired_rates) != len(self.rsus):
                raise TopologyError(f"RSU {k}: wired_rates needs {len(self.rsus)} entries")
            lo, hi = rsu.coverage
            if lo != expected:
                kind = "gap" if lo > expected else "overlap"
                raise TopologyError(f"coverage {kind} at {expected} m before RSU {k}")
            expected = hi
        if expected != self.road_length:
            raise TopologyError(
                f"coverage ends at {expected} m but road_length is {self.road_length} m"
            )
        object.__setattr__(self, "_uppers", tuple(r.coverage[1] for r in self.rsus))

    @property
    def n_rsus(self) -> int:
        return len(self.rsus)

    def check_deadline(self, deadline: float) -> None:
        if not self.slot_duration < deadline:
            raise TopologyError(
                f"slot_duration {self.slot_duration} s must be shorter than the deadline {deadline} s"
            )

    def rsu_at(self, x: float) -> int:
        """Index of the RSU covering ``x``; shared boundaries go to the lower index."""
        if not 0.0 <= x <= self.road_length:
            raise TopologyError(f"position {x} m outside road [0, {self.road_length}]")
        return bisect.bisect_left(self._uppers, x)

    def next_rsu(self, x: float, direction) -> Optional[int]:
        r = self.rsu_at(x)
        nxt = r + int(Direction.parse(direction))
        if 0 <= nxt < self.n_rsus:
            return nxt
        return None

    def eligible_processors(self, r: int) -> List[int]:
        if not 0 <= r < self.n_rsus:
            raise TopologyError(f"no RSU {r}")
        return [j for j in (r - 1, r, r + 1) if 0 <= j < self.n_rsus]

    def wired_rate(self, r: int, j: int) -> float:
        return self.rsus[r].wired_rates[j]

    def distance_to_exit(self, x: float, direction) -> float:
        """Distance along the travel direction to the current cell's exit boundary."""
        lo, hi = self.rsus[self.rsu_at(x)].coverage
        if Direction.parse(direction) is Direction.FORWARD:
            return hi - x
        return x - lo

    def epoch_of(self, slot: int) -> int:
        return slot // self.slots_per_epoch


def uniform_topology(
    n_rsus: int = 6,
    road_length: float = 1200.0,
    compute_rate: float | Sequence[float] = 0.4,
    uplink_rate: float | Sequence[float] = 0.4,
    wired_rate: float = 1.0,
    slot_duration: float = 0.5,
    slots_per_epoch: int = 10,
) -> Topology:
    """Equal-length cells with uniform (or per-RSU) rates."""
    cell = road_length / n_rsus
    c = _per_rsu(compute_rate, n_rsus)
    h = _per_rsu(uplink_rate, n_rsus)
    rsus = []
    for k in range(n_rsus):
        lo = 0.0 if k == 0 else k * cell
        hi = road_length if k == n_rsus - 1 else (k + 1) * cell
        wired = tuple(math.inf if j == k else float(wired_rate) for j in range(n_rsus))
        rsus.append(RsuConfig(k, (lo, hi), c[k], h[k], wired))
    return Topology(road_length, tuple(rsus), slot_duration, slots_per_epoch)


def _per_rsu(value, n):
    if isinstance(value, (int, float)):
        return [float(value)] * n
    values = [float(v) for v in value]
    if len(values) != n:
        raise TopologyError(f"expected {n} per-RSU values, got {len(values)}")
    return values


@dataclass(frozen=True)
class Vehicle:
    endpoint_id: str
    direction: Direction
    task_gen_period: int = 1
    delay_weight: float = 10.0
    phase: int = 0

    def __post_init__(self):
        if self.task_gen_period < 1:
            raise ValueError("task_gen_period must be >= 1")

    def generates_task(self, slot: int) -> bool:
        return (slot + self.phase) % self.task_gen_period == 0


@dataclass(frozen=True)
class Task:
    vehicle: str
    gen_slot: int
    input_size: float
    output_size: float
    deadline: float

    def __post_init__(self):
        if not self.input_size > 0 or not self.output_size > 0:
            raise ValueError("task sizes must be positive")
        if not self.deadline > 0:
            raise ValueError("deadline must be positive")

    @property
    def key(self) -> Tuple[int, str]:
        return (self.gen_slot, self.vehicle)
