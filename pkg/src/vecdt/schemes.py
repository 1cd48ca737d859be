"""Decision schemes: the twin-driven scheme with and without matching, and two baselines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .matching import MatchTask, run_matching
from .policymap import PolicyMap, select_delivery_rsu
from .topology import Direction, Topology

SCHEME_KINDS = ("dt_matching", "dt_only", "migrate_x", "no_coop")
LEARNING_SCHEMES = ("dt_matching", "dt_only")


@dataclass(frozen=True)
class SchemeConfig:
    kind: str
    threshold: float = 0.0  # migrate_x only, metres

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme {self.kind!r}; choose from {', '.join(SCHEME_KINDS)}")
        if self.threshold < 0:
            raise ValueError("migrate threshold must be >= 0")

    @property
    def learns(self) -> bool:
        return self.kind in LEARNING_SCHEMES

    @property
    def label(self) -> str:
        if self.kind == "migrate_x":
            return f"migrate_{self.threshold:g}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "SchemeConfig":
        """``dt_matching``, ``dt_only``, ``no_coop`` or ``migrate_<metres>``."""
        text = text.strip()
        if text.startswith("migrate"):
            rest = text[len("migrate"):]
            if not rest.startswith("_") or rest[1:] in ("", "x"):
                raise ValueError("migrate scheme needs a threshold, e.g. migrate_50")
            try:
                return cls("migrate_x", float(rest[1:]))
            except ValueError:
                raise ValueError(f"bad migrate threshold in {text!r}") from None
        return cls(text)


@dataclass
class PendingTask:
    """A task generated this slot, with the twin-side status used for decisions."""

    vehicle: str
    direction: Direction
    position: float
    predicted_speed: float
    connected: int
    next_rsu: Optional[int]
    eligible: Tuple[int, ...]
    input_size: float


@dataclass
class SchemeCounters:
    policy_map_lookups: int = 0
    matching_calls: int = 0


def decide_delivery(scheme: SchemeConfig, task: PendingTask, topology: Topology,
                    maps: Optional[Mapping[Tuple[int, Direction], PolicyMap]],
                    counters: Optional[SchemeCounters] = None, scale=(1.0, 1.0)) -> int:
    if scheme.kind == "no_coop":
        return task.connected
    if scheme.kind == "migrate_x":
        if task.next_rsu is None:
            return task.connected
        if topology.distance_to_exit(task.position, task.direction) <= scheme.threshold:
            return task.next_rsu
        return task.connected
    if counters is not None:
        counters.policy_map_lookups += 1
    pmap = maps[(task.connected, task.direction)]
    return select_delivery_rsu(task.position, abs(task.predicted_speed), pmap, task.connected,
                               task.next_rsu, scale)


def decide(scheme: SchemeConfig, tasks: Sequence[PendingTask], topology: Topology,
           maps: Optional[Mapping[Tuple[int, Direction], PolicyMap]],
           queue_lengths: Mapping[int, float],
           counters: Optional[SchemeCounters] = None,
           scale=(1.0, 1.0)) -> Dict[str, Tuple[int, int, int]]:
    """Computing policy for every task of one slot.

    Returns ``{vehicle: (processor, delivery_rsu, rounds)}``; ``rounds`` is
    the matching round that settled the processor (0 without matching).
    """
    delivery = {t.vehicle: decide_delivery(scheme, t, topology, maps, counters, scale) for t in tasks}
    if scheme.kind != "dt_matching" or not tasks:
        return {t.vehicle: (t.connected, delivery[t.vehicle], 0) for t in tasks}
    if counters is not None:
        counters.matching_calls += 1
    q_ref = reference_queues(maps, topology)
    match_tasks = [
        MatchTask(t.vehicle, t.connected, delivery[t.vehicle], t.eligible,
                  {j: t.input_size / topology.rsus[j].compute_rate for j in t.eligible})
        for t in tasks
    ]
    result = run_matching(match_tasks, queue_lengths, q_ref)
    return {t.vehicle: (result.processor[t.vehicle], delivery[t.vehicle], result.rounds[t.vehicle])
            for t in tasks}


def reference_queues(maps: Mapping[Tuple[int, Direction], PolicyMap], topology: Topology) -> Dict[int, float]:
    """One reference queue per RSU: the mean of its two direction maps."""
    return {
        r.id: 0.5 * (maps[(r.id, Direction.FORWARD)].q_ref + maps[(r.id, Direction.BACKWARD)].q_ref)
        for r in topology.rsus
    }
