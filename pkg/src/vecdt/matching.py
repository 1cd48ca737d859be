"""Per-slot deferred-acceptance assignment of tasks to processing RSUs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple


@dataclass(frozen=True)
class MatchTask:
    """A task waiting for a processor.

    ``work`` maps each eligible RSU to the task's service time there
    (``H_I / C_r``, seconds).
    """

    vehicle: str
    connected: int
    delivery_rsu: int
    eligible: Tuple[int, ...]
    work: Mapping[int, float]


@dataclass
class MatchResult:
    processor: Dict[str, int]
    rounds: Dict[str, int]
    fallback: Dict[str, bool]
    accepted_work: Dict[int, float] = field(default_factory=dict)


def vehicle_preferences(task: MatchTask, queue_lengths: Mapping[int, float]) -> List[int]:
    """Eligible RSUs by queue length; ties prefer the connected RSU, then lower id."""
    return sorted(task.eligible, key=lambda r: (queue_lengths[r], r != task.connected, r))


def rsu_tier(rsu: int, task: MatchTask) -> int:
    """1: vehicle under this RSU, 2: this RSU delivers the result, 3: anyone else."""
    if task.connected == rsu:
        return 1
    if task.delivery_rsu == rsu:
        return 2
    return 3


def rsu_rank(rsu: int, task: MatchTask) -> Tuple[int, str]:
    return (rsu_tier(rsu, task), task.vehicle)


def project_queue(backlog: float, accepted_work: Sequence[float]) -> float:
    total = backlog
    for w in accepted_work:
        total += w
    return total


def run_matching(tasks: Sequence[MatchTask], queue_lengths: Mapping[int, float],
                 q_ref: Mapping[int, float]) -> MatchResult:
    """Deferred acceptance with reference queue lengths as capacities.

    Each round every free task proposes to its best RSU not yet tried. Each
    RSU ranks its held and new proposals by tier and accepts in that order
    while the projected queue stays within its reference length, rejecting
    everything from the first proposal that does not fit. A task whose list
    runs out is assigned to its connected RSU regardless of load.
    """
    by_id = {t.vehicle: t for t in tasks}
    if len(by_id) != len(tasks):
        raise ValueError("one task per vehicle per slot")
    prefs = {t.vehicle: vehicle_preferences(t, queue_lengths) for t in tasks}
    cursor = {v: 0 for v in by_id}
    held: Dict[int, List[str]] = {}
    free = sorted(by_id)
    result = MatchResult({}, {}, {})
    rnd = 0
    while free:
        rnd += 1
        proposals: Dict[int, List[str]] = {}
        for v in free:
            r = prefs[v][cursor[v]]
            cursor[v] += 1
            proposals.setdefault(r, []).append(v)
        free = []
        for r in sorted(proposals):
            fresh = proposals[r]
            pool = held.get(r, []) + fresh
            pool.sort(key=lambda v: rsu_rank(r, by_id[v]))
            keep, load = [], queue_lengths[r]
            cap = q_ref[r]
            full = load >= cap
            for v in pool:
                w = by_id[v].work[r]
                if not full and load + w <= cap:
                    keep.append(v)
                    load += w
                    if v in fresh:
                        result.rounds[v] = rnd
                else:
                    full = True
                    free.append(v)
            held[r] = keep
        still_free = []
        for v in sorted(free):
            if cursor[v] >= len(prefs[v]):
                result.processor[v] = by_id[v].connected
                result.fallback[v] = True
                result.rounds[v] = rnd
            else:
                still_free.append(v)
        free = still_free
    for r, vs in held.items():
        for v in vs:
            result.processor[v] = r
            result.fallback[v] = False
        result.accepted_work[r] = project_queue(0.0, [by_id[v].work[r] for v in vs])
    return result
