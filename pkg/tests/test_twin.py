import json

import numpy as np
import pytest

from vecdt.delay import EdgeQueue
from vecdt.mobility import TraceSample
from vecdt.topology import Direction
from vecdt.twin import (
    InfrastructureDigitalTwin,
    TwinError,
    VehicleDigitalTwin,
    build_status_matrix,
    dump_events,
)


def _vdt(topo, x=350.0):
    v = VehicleDigitalTwin("a", Direction.FORWARD, 10)
    v.sync(TraceSample(0, "a", x, 12.0), topo)
    return v


def test_record_offload_event_fields(topo):
    v = _vdt(topo)
    e = v.record_offload(0, 350.0, 12.0)
    assert (e.gen_slot, e.location, e.predicted_speed, e.delay, e.discontinuity) == (0, 350.0, 12.0, None, None)
    assert e.rsu == 1 and v.future_rloc is None


def test_event_write_once(topo):
    e = _vdt(topo).record_offload(0, 350.0, 12.0)
    e.complete(1.7, False)
    assert (e.delay, e.discontinuity) == (1.7, False)
    with pytest.raises(TwinError):
        e.complete(2.0, True)


def test_future_rloc_follows_migrating_tasks(topo):
    v = _vdt(topo)
    e1 = v.record_offload(0, 350.0, 12.0, delivery_rsu=2)
    assert v.future_rloc == 2 and v.has_migrating_task
    e2 = v.record_offload(1, 356.0, 12.0, delivery_rsu=1)
    assert v.future_rloc == 2
    v.resolve(e2, 1.0, False)
    assert v.future_rloc == 2
    v.resolve(e1, 1.5, False)
    assert v.future_rloc is None and not v.has_migrating_task


def test_status_matrix_examples(topo):
    v = _vdt(topo, 200.0)
    assert build_status_matrix(1, 0, [], (200.0, 400.0), 5, 5, (5, 25)).counts.sum() == 0
    edge = v.record_offload(0, 200.0, 5.0, rsu=1)
    m = build_status_matrix(1, 0, [edge], (200.0, 400.0), 5, 5, (5, 25))
    assert m.counts[0, 0] == 1 and m.total == 1
    evs = [v.record_offload(0, x, s, rsu=1) for x, s in [(210, 6), (300, 15), (390, -24)]]
    m3 = build_status_matrix(1, 0, evs, (200.0, 400.0), 3, 3, (5, 25))
    tally = np.zeros((3, 3), int)
    for x, s in [(210, 6), (300, 15), (390, 24)]:
        tally[min(int((x - 200) / (200 / 3)), 2), min(int((s - 5) / (20 / 3)), 2)] += 1
    assert np.array_equal(m3.counts, tally) and m3.total == 3
    with pytest.raises(TwinError):
        build_status_matrix(2, 0, evs, (400.0, 600.0), 3, 3, (5, 25))


def test_snapshot_provision():
    idt = InfrastructureDigitalTwin(0, 0.4)
    q = EdgeQueue(0, 0.4)
    assert idt.snapshot_provision(q, 0.0) == 0.0
    q.enqueue("a", q.work_of(0.2), 0.0)
    assert idt.snapshot_provision(q, 0.0) == pytest.approx(0.5)
    q.enqueue("b", q.work_of(0.2), 0.0)
    assert idt.snapshot_provision(q, 0.0) == pytest.approx(1.0)
    assert len(idt.queue_history) == 3


def test_close_epoch_history(topo):
    idt = InfrastructureDigitalTwin(1, 0.4)
    v = _vdt(topo)
    idt.epoch_events.append(v.record_offload(0, 350.0, 12.0))
    m = idt.close_epoch(0, (200.0, 400.0), 5, 5, (5, 25))
    assert m.total == 1 and idt.last_matrix is m and idt.epoch_events == []
    assert idt.close_epoch(1, (200.0, 400.0), 5, 5, (5, 25)).total == 0
    assert len(idt.status_matrices) == 2


def test_dump_events(tmp_path, topo):
    v = _vdt(topo)
    e = v.record_offload(0, 350.0, 12.0, delivery_rsu=2, processor=1)
    e.complete(1.25, False)
    path = tmp_path / "twin.jsonl"
    dump_events(path, [e], epoch=0)
    rec = json.loads(path.read_text())
    assert rec["delay"] == 1.25 and rec["delivery_rsu"] == 2 and rec["epoch"] == 0
