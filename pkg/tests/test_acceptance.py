"""Acceptance suite: one test per criterion, each within its runtime budget.

The summary at the end of the pytest run prints one PASS/FAIL line per
criterion. Criteria 7-9 train the DDPG scheme on the default scenario and
take tens of minutes on one core.
"""

import math
import random
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import (
    check_matching_invariants,
    check_tier_respect,
    fd_grad,
    lindley,
    masked_err,
    matching_oracle,
    random_matching_instance,
    random_nets,
    random_schedule,
    ref_completion,
    ref_delivery,
    ref_epoch_cost,
    ref_offload,
    ref_violation,
)
from vecdt import delay as dl
from vecdt.cli import main
from vecdt.config import load_config
from vecdt.ddpg import actor_objective_and_grad, critic_loss_and_grad, epoch_cost
from vecdt.engine import Engine
from vecdt.experiment import aggregate, run_experiment
from vecdt.kernels import slot_mean_cost
from vecdt.matching import run_matching
from vecdt.policymap import PolicyMap, select_delivery_rsu
from vecdt.topology import Direction, uniform_topology

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "default.yaml"
BENCHMARKS = ("dt_only", "migrate_50", "no_coop")


class _Clock:
    def __init__(self):
        self.restart()

    def restart(self):
        self.start = time.perf_counter()

    def __call__(self):
        return time.perf_counter() - self.start


@pytest.fixture
def clock():
    return _Clock()


@pytest.fixture(scope="module")
def default_cfg():
    return load_config(DEFAULT_CONFIG)


def _table(cells, schemes, values):
    lines = ["value   " + "  ".join(f"{s:>18}" for s in schemes)]
    for v in values:
        lines.append(f"{v:<7} " + "  ".join(f"{cells[(s, v)][0]:8.4f}/{cells[(s, v)][1]:.4f}" for s in schemes))
    return "\n".join(lines)


@pytest.mark.criterion(1, "formula oracles")
def test_formula_oracles(clock):
    # one-off JIT load of the compiled kernel is not part of the budget
    slot_mean_cost([0], [1.0], 1, use_numba=True)
    clock.restart()
    rnd = random.Random(1)
    n = 200
    for _ in range(n):
        H, h, W = rnd.uniform(0.01, 1), rnd.uniform(0.05, 2), rnd.choice([math.inf, rnd.uniform(0.1, 5)])
        r = rnd.randrange(6)
        topo = uniform_topology(6, 1200.0, 0.3, h, W if W != math.inf else 1.0)
        j = r if W == math.inf else min(r + 1, 5) if r < 5 else r - 1
        w = topo.wired_rate(r, j)
        assert dl.offload_delay(H, r, j, topo) == ref_offload(H, h, w)
    for _ in range(n):
        t, O, U = rnd.randrange(10_000), rnd.randrange(64) / 8, rnd.randrange(64) / 8
        eps = rnd.choice([0.25, 0.5, 1.0])
        assert dl.completion_slot(t, O, U, eps) == ref_completion(t, O, U, eps)
    topo = uniform_topology()
    for _ in range(n):
        P, R, D, RY = (rnd.randrange(6) for _ in range(4))
        HO, E1, E2 = rnd.uniform(0.01, 0.5), rnd.uniform(0, 2), rnd.uniform(0, 2)
        got, _, disc = dl.delivery_delay(HO, P, R, D, RY, E1, E2, topo)
        W, h = topo.wired_rate(P, RY), topo.rsus[RY].uplink_rate
        assert got == ref_delivery(HO, W, h, R, D, RY, E1, E2)
        assert disc == (RY not in (R, D))
    for _ in range(n):
        F, tau, disc, w = rnd.uniform(0, 10), rnd.uniform(0.1, 10), rnd.random() < 0.5, rnd.uniform(0, 20)
        assert dl.violation(F, tau, disc, w) == ref_violation(F, tau, disc, w)
    for use_numba in (False, True):
        for _ in range(n):
            k = rnd.randint(1, 12)
            m = rnd.randint(0, 40)
            offsets = [rnd.randrange(k) for _ in range(m)]
            viol = [rnd.choice([0.0, 1.0, 10.0, 11.0, rnd.uniform(0, 11)]) for _ in range(m)]
            assert slot_mean_cost(offsets, viol, k, use_numba=use_numba) == ref_epoch_cost(offsets, viol, k)
            assert epoch_cost(offsets, viol, k) == ref_epoch_cost(offsets, viol, k)
    assert clock() < 1.0


@pytest.mark.criterion(2, "queue oracle")
def test_queue_oracle(clock):
    rnd = random.Random(2)
    for _ in range(50):
        for s, jobs in random_schedule(rnd, max_servers=6, max_tasks=200).items():
            q = dl.EdgeQueue(s, 1.0)
            got = [q.enqueue(i, float(w), float(a)) for i, (a, w) in enumerate(jobs)]
            assert got == [float(u) for u in lindley([a for a, _ in jobs], [w for _, w in jobs])]
    assert clock() < 5.0


@pytest.mark.criterion(3, "matching oracle")
def test_matching_oracle(clock):
    rnd = random.Random(3)
    for _ in range(500):
        tasks, queue, cap = random_matching_instance(rnd)
        res = run_matching(tasks, queue, cap)
        assert {v: (res.processor[v], res.fallback[v]) for v in res.processor} == matching_oracle(tasks, queue, cap)
        check_matching_invariants(tasks, queue, cap, res)
        check_tier_respect(tasks, queue, res)
    assert clock() < 10.0


@pytest.mark.criterion(4, "gradient checks")
def test_gradient_checks(clock):
    for seed in range(20):
        actor, critic, s, a, y = random_nets(seed)
        _, grads = critic_loss_and_grad(critic, s, a, y)
        numeric = fd_grad(lambda p: critic_loss_and_grad(critic, s, a, y, p)[0], critic.params)
        assert masked_err(grads, numeric) < 1e-4
        _, grads = actor_objective_and_grad(actor, critic, s)
        numeric = fd_grad(lambda p: actor_objective_and_grad(actor, critic, s, p)[0], actor.params)
        assert masked_err(grads, numeric) < 1e-4
    assert clock() < 30.0


@pytest.mark.criterion(5, "decision rule properties")
def test_decision_rule_properties(clock):
    rng = np.random.default_rng(5)
    fwd = Direction.FORWARD
    for _ in range(1000):
        x_hat, x, lx = rng.uniform(0, 200, 3)
        v_hat, v, lv = rng.uniform(5, 25, 3)
        a, b = rng.normal(size=2)
        g = -(a * lx + b * lv)
        c = rng.choice([-1, 1]) * 10 ** rng.uniform(-3, 3)
        base = PolicyMap(0, 0, fwd, x_hat, v_hat, a, b, g, 1.0)
        scaled = PolicyMap(0, 0, fwd, x_hat, v_hat, c * a, c * b, c * g, 1.0)
        assert select_delivery_rsu(x, v, base, 0, 1) == select_delivery_rsu(x, v, scaled, 0, 1)
        # at the point benchmark: stay; on the line but off the point: migrate
        assert select_delivery_rsu(x_hat, v_hat, base, 0, 1) == 0
        if math.hypot(lx - x_hat, lv - v_hat) > 1e-6:
            assert select_delivery_rsu(lx, lv, base, 0, 1) == 1
        assert select_delivery_rsu(lx, lv, base, 0, None) == 0
    m = PolicyMap(0, 0, fwd, 100.0, 10.0, 1.0, 0.0, -190.0, 1.0)
    assert select_delivery_rsu(185, 12, m, 0, 1) == 1
    assert clock() < 1.0


@pytest.mark.criterion(6, "determinism")
def test_determinism(tmp_path, clock):
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        ckpt = out / "agent.ckpt"
        assert main(["train", "--config", str(DEFAULT_CONFIG), "--seeds", "7", "--epochs", "100",
                     "--out", str(out), "--checkpoint", str(ckpt)]) == 0
        assert main(["evaluate", "--config", str(DEFAULT_CONFIG), "--checkpoint", str(ckpt), "--seeds", "8",
                     "--epochs", "10", "--out", str(out)]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    a, b = outputs
    assert any(n.endswith(".csv") for n in a) and any(n.endswith(".ckpt") for n in a)
    assert a.keys() == b.keys()
    for name in a:
        assert a[name] == b[name], f"{name} differs between runs"
    assert clock() < 300.0


@pytest.mark.criterion(7, "learning signal")
def test_learning_signal(default_cfg, clock):
    improved, report = 0, []
    for seed in range(1, 6):
        rows = Engine(default_cfg.replace(engine={"seed": seed}), keep_sessions=False).run_epochs(500)
        costs = [r["cost"] for r in rows]
        first, last = float(np.mean(costs[:20])), float(np.mean(costs[-20:]))
        improved += last < first
        report.append(f"seed {seed}: first-20 {first:.4f} last-20 {last:.4f}")
    print("\n".join(report))
    assert improved >= 4, "; ".join(report)
    assert clock() < 1800.0


@pytest.mark.criterion(8, "compute-rate sweep ordering")
def test_compute_rate_sweep(default_cfg, tmp_path, clock):
    values = list(default_cfg.experiment.sweep_values)
    assert default_cfg.experiment.sweep == "compute_rate" and len(values) == 4
    schemes = ("dt_matching",) + BENCHMARKS
    results = run_experiment(default_cfg, schemes=schemes, seeds=[1, 2, 3, 4, 5], sweep="compute_rate",
                             values=values, out_dir=tmp_path)
    cells = aggregate(results)
    table = _table(cells, schemes, values)
    print(table)
    low = min(values)
    cost = {s: cells[(s, low)][0] for s in schemes}
    problems = []
    if not cost["dt_matching"] <= cost["dt_only"] <= cost["no_coop"]:
        problems.append(f"cost order at C={low}: {cost}")
    for v in values:
        best = max(cells[(s, v)][1] for s in BENCHMARKS)
        if cells[("dt_matching", v)][1] < best:
            problems.append(f"satisfaction at C={v}: dt_matching {cells[('dt_matching', v)][1]:.4f} < {best:.4f}")
    assert not problems, "; ".join(problems) + "\n" + table
    assert clock() < 3600.0


@pytest.mark.criterion(9, "E2 sweep ordering")
def test_e2_sweep(default_cfg, tmp_path, clock):
    values = [0.25, 0.5, 1.0, 1.5]
    schemes = ("dt_matching",) + BENCHMARKS
    results = run_experiment(default_cfg, schemes=schemes, seeds=[1, 2, 3, 4, 5], sweep="E2",
                             values=values, out_dir=tmp_path)
    cells = aggregate(results)
    table = _table(cells, schemes, values)
    print(table)
    ours = [cells[("dt_matching", v)][0] for v in values]
    problems = []
    if any(b < a for a, b in zip(ours, ours[1:])):
        problems.append(f"dt_matching cost not non-decreasing: {np.round(ours, 4).tolist()}")
    for v in values:
        for s in BENCHMARKS:
            if cells[("dt_matching", v)][0] > cells[(s, v)][0]:
                problems.append(f"E2={v}: dt_matching {cells[('dt_matching', v)][0]:.4f} > {s} {cells[(s, v)][0]:.4f}")
    assert not problems, "; ".join(problems) + "\n" + table
    assert clock() < 3600.0
