"""Scheme comparison over a parameter sweep and several seeds.

Learning schemes are trained on their seed's traffic and then evaluated
with the actor frozen and exploration off; every scheme is evaluated on
the same held-out traffic (seed + ``EVAL_SEED_OFFSET``) so the comparison
is paired.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence

from . import metrics
from .config import Config
from .engine import Engine
from .schemes import SchemeConfig

log = logging.getLogger(__name__)

EVAL_SEED_OFFSET = 1000
SWEEPS = {"compute_rate": ("topology", "compute_rate"), "E2": ("task", "e2")}


@dataclass
class RunResult:
    scheme: str
    sweep: str
    value: Optional[float]
    seed: int
    train_rows: List[dict]
    eval_rows: List[dict]
    mean_cost: float
    mean_satisfaction: float

    def summary(self) -> dict:
        return {
            "scheme": self.scheme, "sweep": self.sweep,
            "value": "" if self.value is None else self.value, "seed": self.seed,
            "epochs": len(self.eval_rows), "mean_cost": self.mean_cost,
            "mean_satisfaction": self.mean_satisfaction,
        }


def apply_sweep(config: Config, sweep: str, value: Optional[float]) -> Config:
    if sweep == "none" or value is None:
        return config
    if sweep not in SWEEPS:
        raise ValueError(f"unknown sweep {sweep!r}; expected one of {sorted(SWEEPS)}")
    section, key = SWEEPS[sweep]
    return config.replace(**{section: {key: float(value)}}).validate()


def run_single(config: Config, scheme: str, seed: int, train_epochs: int, eval_epochs: int,
               sweep: str = "none", value: Optional[float] = None,
               out_dir=None, eval_warmup: Optional[int] = None) -> RunResult:
    cfg = apply_sweep(config, sweep, value).replace(engine={"scheme": scheme, "seed": seed})
    warmup = cfg.experiment.eval_warmup if eval_warmup is None else eval_warmup
    name = metrics.run_name(scheme, seed, sweep, value)
    agent, train_rows = None, []
    if SchemeConfig.parse(scheme).learns and train_epochs > 0:
        trainer = Engine(cfg, keep_sessions=False)
        train_rows = trainer.run_epochs(train_epochs)
        agent = trainer.agent
    evaluator = Engine(cfg.replace(engine={"seed": seed + EVAL_SEED_OFFSET}), agent=agent,
                       training=False, keep_sessions=out_dir is not None)
    eval_rows = evaluator.run_epochs(eval_epochs)
    cost, sat = metrics.summarize(eval_rows, skip=warmup)
    if out_dir is not None:
        out = Path(out_dir)
        if train_rows:
            metrics.write_epochs(out / f"train_{name}.csv", train_rows)
        metrics.write_epochs(out / f"epochs_{name}.csv", eval_rows)
        metrics.write_sessions(out / f"sessions_{name}.csv", evaluator.sessions)
    log.info("%s: cost %.4f satisfaction %.4f", name, cost, sat)
    return RunResult(scheme, sweep, value, seed, train_rows, eval_rows, cost, sat)


def run_experiment(config: Config, schemes: Optional[Sequence[str]] = None,
                   seeds: Optional[Sequence[int]] = None, sweep: Optional[str] = None,
                   values: Optional[Sequence[float]] = None, out_dir=None,
                   train_epochs: Optional[int] = None, eval_epochs: Optional[int] = None,
                   progress: Optional[Callable[[RunResult], None]] = None) -> List[RunResult]:
    ex = config.experiment
    schemes = list(schemes or ex.schemes)
    seeds = list(seeds or ex.seeds)
    sweep = sweep or ex.sweep
    points = list(values or ex.sweep_values) if sweep != "none" else [None]
    train_epochs = ex.train_epochs if train_epochs is None else train_epochs
    eval_epochs = ex.eval_epochs if eval_epochs is None else eval_epochs
    results = []
    for value in points:
        for scheme in schemes:
            for seed in seeds:
                res = run_single(config, scheme, seed, train_epochs, eval_epochs, sweep, value, out_dir)
                results.append(res)
                if progress is not None:
                    progress(res)
    if out_dir is not None:
        metrics.write_rows(Path(out_dir) / "summary.csv", metrics.SUMMARY_FIELDS,
                           (r.summary() for r in results))
    return results


def aggregate(results: Sequence[RunResult]) -> dict:
    """Seed-averaged (cost, satisfaction) keyed by (scheme, value)."""
    acc = {}
    for r in results:
        acc.setdefault((r.scheme, r.value), []).append(r)
    return {
        key: (sum(r.mean_cost for r in rs) / len(rs), sum(r.mean_satisfaction for r in rs) / len(rs))
        for key, rs in acc.items()
    }
