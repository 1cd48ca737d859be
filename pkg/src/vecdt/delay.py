"""Delay components of a computing session and the FIFO edge queue."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

from .topology import Topology


class QueueError(RuntimeError):
    pass


class DelayError(ValueError):
    pass


class _Job(NamedTuple):
    key: object
    arrival: float
    start: float
    finish: float
    work: float


class EdgeQueue:
    """Single-server FIFO queue measured in seconds of work.

    Work for a task is ``H_I / C_r`` and is fixed at enqueue time, so the
    server drains one second of work per second of simulated time. Arrival
    times must be non-decreasing; a task may be enqueued before it arrives
    (offload delay still in progress) and then counts as committed work.
    """

    def __init__(self, rsu: int, compute_rate: float):
        self.rsu = rsu
        self.compute_rate = compute_rate
        self._jobs: List[_Job] = []
        self._free_at = 0.0
        self._last_arrival = -math.inf
        self.clock = 0.0

    def work_of(self, input_size: float) -> float:
        return input_size / self.compute_rate

    def enqueue(self, key, work: float, arrival_time: float) -> float:
        """Append a task; returns its processing delay U (wait + own service)."""
        if work < 0:
            raise QueueError("negative work")
        if arrival_time < self.clock or arrival_time < self._last_arrival:
            raise QueueError(
                f"RSU {self.rsu}: arrival at {arrival_time} precedes queue time "
                f"{max(self.clock, self._last_arrival)}"
            )
        start = max(self._free_at, arrival_time)
        finish = start + work
        self._jobs.append(_Job(key, arrival_time, start, finish, work))
        self._free_at = finish
        self._last_arrival = arrival_time
        return finish - arrival_time

    def advance_to(self, time: float) -> List[object]:
        """Move the clock forward; returns keys of tasks finished by ``time`` in FIFO order."""
        if time < self.clock:
            raise QueueError(f"RSU {self.rsu}: clock cannot go back from {self.clock} to {time}")
        self.clock = time
        done = 0
        while done < len(self._jobs) and self._jobs[done].finish <= time:
            done += 1
        finished = [j.key for j in self._jobs[:done]]
        del self._jobs[:done]
        return finished

    def backlog(self, time: Optional[float] = None) -> float:
        """Committed residual work at ``time`` (defaults to the queue clock)."""
        t = self.clock if time is None else time
        total = 0.0
        for j in self._jobs:
            if j.finish > t:
                total += j.work if j.start >= t else j.finish - t
        return total

    residual_work = property(backlog)

    def __len__(self):
        return len(self._jobs)


def offload_delay(input_size: float, connected: int, processor: int, topology: Topology) -> float:
    """Uplink to the connected RSU plus the wired hop to the processor (zero if local)."""
    if processor not in topology.eligible_processors(connected):
        raise DelayError(f"RSU {processor} is not eligible for a vehicle under RSU {connected}")
    h = topology.rsus[connected].uplink_rate
    w = topology.wired_rate(connected, processor)
    return input_size * (1.0 / h + 1.0 / w)


def completion_slot(slot: int, offload: float, processing: float, slot_duration: float) -> int:
    if offload < 0 or processing < 0:
        raise DelayError("delays must be non-negative")
    return slot + math.ceil((offload + processing) / slot_duration)


def delivery_delay(output_size: float, processor: int, connected: int, delivery_rsu: int,
                   actual_rsu: int, e1: float, e2: float,
                   topology: Topology) -> Tuple[float, float, bool]:
    """Result delivery delay, the extra signalling term E and the discontinuity flag.

    The result travels processor -> RSU covering the vehicle at completion
    -> vehicle. E is ``e1`` when that RSU is neither the offload RSU nor the
    delivery RSU, ``e2`` when the vehicle stayed but the result was
    migrated, and zero otherwise.
    """
    discontinuity = actual_rsu != connected and actual_rsu != delivery_rsu
    if discontinuity:
        extra = e1
    elif actual_rsu == connected and connected != delivery_rsu:
        extra = e2
    else:
        extra = 0.0
    w = topology.wired_rate(processor, actual_rsu)
    h = topology.rsus[actual_rsu].uplink_rate
    return output_size * (1.0 / w + 1.0 / h) + extra, extra, discontinuity


def violation(total_delay: float, deadline: float, discontinuity: bool, weight: float) -> float:
    return float(total_delay > deadline) + weight * float(bool(discontinuity))


@dataclass(frozen=True)
class SessionOutcome:
    vehicle: str
    gen_slot: int
    connected: int
    processor: int
    delivery_rsu: int
    actual_rsu: int
    offload: float
    processing: float
    delivery: float
    extra: float
    total: float
    completion_slot: int
    discontinuity: bool
    exited: bool
    violation: float

    @classmethod
    def compose(cls, *, vehicle, gen_slot, connected, processor, delivery_rsu, actual_rsu,
                offload, processing, delivery, extra, completion_slot, discontinuity,
                exited, deadline, weight) -> "SessionOutcome":
        total = offload + processing + delivery
        return cls(vehicle, gen_slot, connected, processor, delivery_rsu, actual_rsu,
                   offload, processing, delivery, extra, total, completion_slot,
                   discontinuity, exited, violation(total, deadline, discontinuity, weight))

    FIELDS = (
        "vehicle", "gen_slot", "connected", "processor", "delivery_rsu", "actual_rsu",
        "offload", "processing", "delivery", "extra", "total", "completion_slot",
        "discontinuity", "exited", "violation",
    )

    def row(self) -> list:
        return [getattr(self, f) for f in self.FIELDS]
