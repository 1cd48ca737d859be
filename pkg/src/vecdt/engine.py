"""Slotted simulation loop tying mobility, twins, schemes, queues and learning together.

Each slot runs six phases in order: mobility and twin sync, resolution of
sessions completing in this slot, task generation, scheme decisions,
enqueueing, and a provision snapshot. Every ``K`` slots the engine closes an
epoch: it builds status matrices and encodes the next learning state. An
epoch's cost is finalized once every session offloaded in it has resolved,
and only then is the transition stored and learned from.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import delay as dl
from .config import Config
from .ddpg import DDPGAgent, epoch_cost
from .mobility import SyntheticMobility, TraceMobility, predict_speed
from .policymap import ActionBounds, action_dim, decode_action, starting_action
from .schemes import PendingTask, SchemeConfig, SchemeCounters, decide
from .topology import Direction, Task, Vehicle
from .twin import InfrastructureDigitalTwin, OffloadingEvent, VehicleDigitalTwin

log = logging.getLogger(__name__)

STREAMS = ("mobility", "arrivals", "ddpg", "noise")


class EngineFault(RuntimeError):
    """Internal ordering or accounting violation."""


def rng_streams(seed: int) -> Dict[str, np.random.Generator]:
    """Independent named generators derived from one master seed."""
    return {
        name: np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        for k, name in enumerate(STREAMS)
    }


def state_dim(config: Config) -> int:
    n = config.topology.n_rsus
    tw = config.twin
    return 3 * n + n * tw.offload_window + n * tw.n_x * tw.n_v


@dataclass
class _Session:
    task: Task
    event: OffloadingEvent
    connected: int
    processor: int
    delivery_rsu: int
    offload: float
    processing: float
    completion_slot: int
    epoch: int
    rounds: int


@dataclass
class _EpochAccount:
    epoch: int
    state: Optional[np.ndarray]
    action: Optional[np.ndarray]
    next_state: Optional[np.ndarray] = None
    closed: bool = False
    outstanding: int = 0
    offsets: List[int] = field(default_factory=list)
    violations: List[float] = field(default_factory=list)
    satisfied: int = 0
    discontinuities: int = 0
    tasks: int = 0


@dataclass
class SlotReport:
    slot: int
    vehicles: int
    generated: int
    resolved: int
    queue_lengths: Tuple[float, ...]


class Engine:
    def __init__(self, config: Config, mobility=None, agent: Optional[DDPGAgent] = None,
                 training: bool = True, keep_sessions: bool = True):
        self.config = config
        self.topology = config.topology.build()
        self.scheme = SchemeConfig.parse(config.engine.scheme)
        self.streams = rng_streams(config.engine.seed)
        self.training = training and self.scheme.learns
        self.keep_sessions = keep_sessions
        tc, mc = config.task, config.mobility
        if mobility is None:
            if mc.kind == "trace":
                mobility = TraceMobility.from_csv(mc.trace, v_max=mc.v_max,
                                                  slot_duration=self.topology.slot_duration)
            else:
                mobility = SyntheticMobility(mc, self.topology.road_length,
                                             self.topology.slot_duration, self.streams["mobility"])
        self.mobility = mobility
        self.vehicles: Dict[str, Vehicle] = {}
        self.vdts: Dict[str, VehicleDigitalTwin] = {}
        self.departed: Dict[str, VehicleDigitalTwin] = {}
        self.idts = [InfrastructureDigitalTwin(r.id, r.compute_rate) for r in self.topology.rsus]
        self.queues = [dl.EdgeQueue(r.id, r.compute_rate) for r in self.topology.rsus]
        self.due: Dict[int, List[_Session]] = {}
        self.counters = SchemeCounters()
        self.bounds = ActionBounds(
            mc.v_min, mc.v_max,
            tuple(config.twin.q_max_factor * tc.input_size / r.compute_rate for r in self.topology.rsus),
        )
        self.agent = agent
        if self.scheme.learns and self.agent is None:
            self.agent = DDPGAgent(state_dim(config), action_dim(self.topology), config.ddpg,
                                   self.streams["ddpg"], self.streams["noise"])
            self.agent.set_output_bias(starting_action(self.topology, config.twin.initial_line_offset))
        self.maps = None
        self.slot = 0
        self.generating = True
        self.drained = False
        self.offload_counts: List[List[int]] = []
        self.accounts: Dict[int, _EpochAccount] = {}
        self.sessions: List[dl.SessionOutcome] = []
        self.epoch_rows: List[dict] = []
        self.assignments: List[tuple] = []
        self.policy_log: List[dict] = []
        self._next_state: Optional[np.ndarray] = None

    # ------------------------------------------------------------------
    # public driving API
    # ------------------------------------------------------------------

    @property
    def epoch(self) -> int:
        return self.topology.epoch_of(self.slot)

    def run_epochs(self, n_epochs: int, drain: bool = True) -> List[dict]:
        start = len(self.epoch_rows)
        for _ in range(n_epochs):
            self.step_epoch()
        if drain:
            self.drain()
        return self.epoch_rows[start:]

    def step_epoch(self) -> None:
        K = self.topology.slots_per_epoch
        if self.drained:
            raise EngineFault("engine was drained; checkpoint before draining to continue a run")
        if self.slot % K != 0:
            raise EngineFault("step_epoch called mid-epoch")
        for _ in range(K):
            self.step_slot()

    def drain(self, max_slots: int = 100000) -> None:
        """Advance without generating tasks until every session has resolved.

        This ends the run: the clock stops mid-epoch, so no further epochs
        can be stepped.
        """
        self.generating = False
        n = 0
        while self.due or any(not a.closed or a.outstanding for a in self.accounts.values()):
            if n >= max_slots:
                raise EngineFault("sessions did not resolve while draining")
            self.step_slot()
            n += 1
        self.drained = True

    def step_slot(self) -> SlotReport:
        t = self.slot
        K = self.topology.slots_per_epoch
        eps = self.topology.slot_duration
        if t % K == 0:
            self._begin_epoch(t // K, t)
        # phase 1: mobility and twin sync
        samples = self.mobility.advance(t)
        self._sync(samples, t)
        for q in self.queues:
            q.advance_to(t * eps)
        # phase 2: deliveries due now
        resolved = self._resolve_due(t)
        # phase 3: task generation
        tasks = self._generate(t) if self.generating else []
        # phase 4-5: decisions and enqueueing
        counts = [0] * self.topology.n_rsus
        if tasks:
            self._place(tasks, t, counts)
        self.offload_counts.append(counts)
        if len(self.offload_counts) > self.config.twin.offload_window:
            del self.offload_counts[0]
        # phase 6: provision snapshot
        qlens = tuple(idt.snapshot_provision(q, t * eps) for idt, q in zip(self.idts, self.queues))
        self.slot = t + 1
        if self.slot % K == 0:
            self._close_epoch(t // K)
        self._finalize_ready()
        return SlotReport(t, len(self.vdts), len(tasks), resolved, qlens)

    # ------------------------------------------------------------------
    # phases
    # ------------------------------------------------------------------

    def _sync(self, samples, t):
        seen = set()
        for s in sorted(samples, key=lambda s: s.vehicle):
            seen.add(s.vehicle)
            vdt = self.vdts.get(s.vehicle)
            if vdt is None:
                if s.vehicle in self.departed:
                    raise EngineFault(f"vehicle {s.vehicle} re-entered after leaving")
                meta = self.mobility.meta(s.vehicle)
                period = self.config.task.gen_period
                phase = int(self.streams["arrivals"].integers(0, period))
                self.vehicles[s.vehicle] = Vehicle(s.vehicle, meta.direction, period,
                                                   self.config.task.weight, phase)
                vdt = VehicleDigitalTwin(s.vehicle, meta.direction, self.config.twin.window)
                self.vdts[s.vehicle] = vdt
            vdt.sync(s, self.topology)
        for eid in [e for e in self.vdts if e not in seen]:
            self.departed[eid] = self.vdts.pop(eid)

    def _generate(self, t) -> List[Task]:
        tc = self.config.task
        return [
            Task(eid, t, tc.input_size, tc.output_size, tc.deadline)
            for eid in sorted(self.vdts)
            if self.vehicles[eid].generates_task(t)
        ]

    def _place(self, tasks: List[Task], t: int, counts: List[int]) -> None:
        topo = self.topology
        eps = topo.slot_duration
        tc = self.config.task
        pending = []
        for task in tasks:
            vdt = self.vdts[task.vehicle]
            x = vdt.latest.position
            r = vdt.current_rloc
            v = predict_speed(vdt.trajectory, tc.deadline, eps)
            pending.append(PendingTask(task.vehicle, vdt.direction, x, v, r,
                                       topo.next_rsu(x, vdt.direction),
                                       tuple(topo.eligible_processors(r)), tc.input_size))
        qlens = {q.rsu: q.backlog(t * eps) for q in self.queues}
        policy = decide(self.scheme, pending, topo, self.maps, qlens, self.counters,
                        tuple(self.config.twin.distance_scale))
        account = self.accounts[topo.epoch_of(t)]
        placed = []
        for task, p in zip(tasks, pending):
            proc, deliv, rounds = policy[task.vehicle]
            offload = dl.offload_delay(task.input_size, p.connected, proc, topo)
            placed.append((t * eps + offload, task.vehicle, task, p, proc, deliv, rounds, offload))
        placed.sort(key=lambda item: (item[0], item[1]))
        for arrival, eid, task, p, proc, deliv, rounds, offload in placed:
            q = self.queues[proc]
            processing = q.enqueue(task.key, q.work_of(task.input_size), arrival)
            y = dl.completion_slot(t, offload, processing, eps)
            event = self.vdts[eid].record_offload(t, p.position, p.predicted_speed, deliv, proc, p.connected)
            self.idts[p.connected].epoch_events.append(event)
            session = _Session(task, event, p.connected, proc, deliv, offload, processing, y,
                               account.epoch, rounds)
            if y <= t:
                raise EngineFault("completion slot must follow the offload slot")
            self.due.setdefault(y, []).append(session)
            account.outstanding += 1
            account.tasks += 1
            counts[p.connected] += 1
            self.assignments.append((t, eid, p.connected, deliv, proc, rounds))

    def _resolve_due(self, t) -> int:
        sessions = self.due.pop(t, [])
        tc = self.config.task
        for s in sorted(sessions, key=lambda s: s.task.key):
            eid = s.task.vehicle
            exited = eid not in self.vdts
            vdt = self.departed[eid] if exited else self.vdts[eid]
            actual = vdt.current_rloc
            delivery, extra, disc = dl.delivery_delay(
                s.task.output_size, s.processor, s.connected, s.delivery_rsu, actual,
                tc.e1, tc.e2, self.topology,
            )
            if exited and not disc:
                # the vehicle left the road: no RSU can deliver
                delivery += tc.e1 - extra
                extra, disc = tc.e1, True
            outcome = dl.SessionOutcome.compose(
                vehicle=eid, gen_slot=s.task.gen_slot, connected=s.connected,
                processor=s.processor, delivery_rsu=s.delivery_rsu, actual_rsu=actual,
                offload=s.offload, processing=s.processing, delivery=delivery, extra=extra,
                completion_slot=s.completion_slot, discontinuity=disc, exited=exited,
                deadline=s.task.deadline, weight=self.vehicles[eid].delay_weight,
            )
            vdt.resolve(s.event, outcome.total, disc)
            if self.keep_sessions:
                self.sessions.append(outcome)
            acc = self.accounts[s.epoch]
            acc.outstanding -= 1
            acc.offsets.append(s.task.gen_slot - s.epoch * self.topology.slots_per_epoch)
            acc.violations.append(outcome.violation)
            acc.satisfied += outcome.total <= s.task.deadline
            acc.discontinuities += disc
        return len(sessions)

    # ------------------------------------------------------------------
    # epochs and learning
    # ------------------------------------------------------------------

    def _begin_epoch(self, k: int, t: int) -> None:
        if not self.generating:
            return
        state = self._next_state if self._next_state is not None else self.encode_state(t)
        self._next_state = None
        action = None
        if self.scheme.learns:
            action = self.agent.act(state, explore=self.training)
            self.maps = decode_action(action, self.topology, self.bounds, epoch=k, squash=False)
            for (rsu, direction), m in sorted(self.maps.items(), key=lambda kv: (kv[0][0], int(kv[0][1]))):
                self.idts[rsu].policy_maps[int(direction)] = m
        self.accounts[k] = _EpochAccount(k, state, action)

    def _close_epoch(self, k: int) -> None:
        tw = self.config.twin
        for idt, rsu in zip(self.idts, self.topology.rsus):
            idt.close_epoch(k, rsu.coverage, tw.n_x, tw.n_v,
                            (self.config.mobility.v_min, self.config.mobility.v_max))
        acc = self.accounts.get(k)
        if acc is None:
            return
        self._next_state = self.encode_state(self.slot)
        acc.next_state = self._next_state
        acc.closed = True
        if self.maps is not None:
            self.policy_log.extend(m.as_dict() for _, m in sorted(
                self.maps.items(), key=lambda kv: (kv[0][0], int(kv[0][1]))))
        if self.training:
            self.agent.end_epoch()

    def _finalize_ready(self) -> None:
        while self.accounts:
            k = min(self.accounts)
            acc = self.accounts[k]
            if not acc.closed or acc.outstanding:
                return
            del self.accounts[k]
            cost = epoch_cost(acc.offsets, acc.violations, self.topology.slots_per_epoch)
            loss = None
            if self.training:
                self.agent.remember(acc.state, acc.action, cost, acc.next_state)
                loss = self.agent.learn()
            self.epoch_rows.append({
                "epoch": k,
                "cost": cost,
                "satisfaction": acc.satisfied / acc.tasks if acc.tasks else 1.0,
                "discontinuities": acc.discontinuities,
                "tasks": acc.tasks,
                "critic_loss": loss if loss is not None else float("nan"),
                "noise_std": self.agent.noise.std if self.agent is not None else 0.0,
            })

    def encode_state(self, t: int) -> np.ndarray:
        """Learning state at slot ``t``: compute rates, uplink rates, queue
        lengths, trailing per-slot offload counts (RSU-major, oldest first)
        and the previous epoch's status matrices (RSU-major, row-major)."""
        topo, tw = self.topology, self.config.twin
        eps = topo.slot_duration
        n = topo.n_rsus
        rates = np.array([r.compute_rate for r in topo.rsus]) / tw.rate_scale
        uplink = np.array([r.uplink_rate for r in topo.rsus]) / tw.rate_scale
        queues = np.array([q.backlog(t * eps) for q in self.queues]) / self.config.task.deadline
        counts = np.zeros((tw.offload_window, n))
        hist = self.offload_counts[-tw.offload_window:]
        if hist:
            counts[tw.offload_window - len(hist):] = np.array(hist)
        counts = counts.T.ravel() / tw.count_scale
        mats = np.zeros((n, tw.n_x, tw.n_v))
        for idt in self.idts:
            m = idt.last_matrix
            if m is not None:
                mats[idt.rsu] = m.counts
        mats = mats.ravel() / tw.count_scale
        state = np.concatenate([rates, uplink, queues, counts, mats])
        if state.shape != (state_dim(self.config),):
            raise EngineFault(f"state dimension {state.shape} does not match the configuration")
        return state
