"""Command-line entry point: ``vecdt {run,train,evaluate,validate-config}``.

The output directory comes from ``--out``, else ``experiment.out`` in the
config; the ``VECDT_OUT`` environment variable overrides both.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import metrics
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, default_config, load_config, output_dir
from .engine import Engine
from .experiment import SWEEPS, aggregate, run_experiment, run_single
from .schemes import SchemeConfig
from .twin import dump_events

log = logging.getLogger("vecdt")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _sweep(text: str):
    """``compute_rate=0.1,0.2`` or ``E2=0.25,0.5`` or ``none``."""
    if text == "none":
        return "none", []
    name, _, values = text.partition("=")
    if name not in SWEEPS or not values:
        raise argparse.ArgumentTypeError(f"expected NAME=v1,v2,... with NAME in {sorted(SWEEPS)}")
    try:
        return name, [float(v) for v in values.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad sweep values in {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vecdt", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scheme_help):
        sp.add_argument("--config", help="YAML config file (defaults are used when omitted)")
        sp.add_argument("--scheme", help=scheme_help)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--epochs", type=int)

    run = sub.add_parser("run", help="scheme x sweep x seed grid with a summary table")
    common(run, "comma-separated schemes, e.g. dt_matching,migrate_50")
    run.add_argument("--seeds", type=_int_list)
    run.add_argument("--sweep", type=_sweep, help="NAME=v1,v2,... (compute_rate or E2) or none")
    run.add_argument("--train-epochs", type=int)

    train = sub.add_parser("train", help="train a learning scheme with periodic checkpoints")
    common(train, "dt_matching or dt_only")
    train.add_argument("--seeds", type=_int_list, help="single seed")
    train.add_argument("--checkpoint", help="checkpoint path; resumed from when it exists")
    train.add_argument("--every", type=int, help="checkpoint period in epochs")

    ev = sub.add_parser("evaluate", help="evaluate a scheme or a trained checkpoint")
    common(ev, "scheme (ignored with --checkpoint)")
    ev.add_argument("--seeds", type=_int_list)
    ev.add_argument("--checkpoint")

    val = sub.add_parser("validate-config", help="parse and check a config file")
    val.add_argument("--config", required=True)
    return p


def _load(args):
    cfg = load_config(args.config) if args.config else default_config()
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    schemes = args.scheme.split(",") if args.scheme else None
    for s in schemes or []:
        SchemeConfig.parse(s)
    sweep, values = args.sweep if args.sweep else (None, None)
    out = Path(output_dir(args.out, cfg))
    results = run_experiment(cfg, schemes, args.seeds, sweep, values or None, out,
                             train_epochs=args.train_epochs, eval_epochs=args.epochs,
                             progress=lambda r: log.info("done %s seed %d value %s: cost %.4f sat %.4f",
                                                         r.scheme, r.seed, r.value, r.mean_cost,
                                                         r.mean_satisfaction))
    print(f"{'scheme':<14}{'value':>10}{'cost':>10}{'satisfaction':>14}")
    for (scheme, value), (cost, sat) in aggregate(results).items():
        print(f"{scheme:<14}{'' if value is None else f'{value:g}':>10}{cost:>10.4f}{sat:>14.4f}")
    print(f"summary written to {out / 'summary.csv'}")
    return 0


def cmd_train(args) -> int:
    cfg = _load(args)
    out = Path(output_dir(args.out, cfg))
    ckpt = Path(args.checkpoint) if args.checkpoint else None
    if ckpt is not None and ckpt.exists():
        engine = load_checkpoint(ckpt)
        log.info("resumed from %s at epoch %d", ckpt, engine.epoch)
    else:
        if args.scheme:
            cfg = cfg.replace(engine={"scheme": args.scheme})
        if args.seeds:
            cfg = cfg.replace(engine={"seed": args.seeds[0]})
        if not SchemeConfig.parse(cfg.engine.scheme).learns:
            raise ConfigError(f"scheme {cfg.engine.scheme} does not learn; train needs dt_matching or dt_only")
        engine = Engine(cfg, keep_sessions=False)
    ec = engine.config
    total = args.epochs or ec.engine.epochs
    every = args.every or ec.experiment.checkpoint_every
    name = metrics.run_name(ec.engine.scheme, ec.engine.seed)
    if ckpt is None:
        ckpt = out / f"checkpoint_{name}.ckpt"
    while engine.epoch < total:
        engine.step_epoch()
        if engine.epoch % every == 0 or engine.epoch == total:
            save_checkpoint(ckpt, engine)
            log.info("epoch %d: checkpoint %s", engine.epoch, ckpt)
    engine.drain()
    path = metrics.write_epochs(out / f"train_{name}.csv", engine.epoch_rows)
    rows = engine.epoch_rows
    tail = rows[-20:]
    print(f"trained {len(rows)} epochs; last-20 mean cost "
          f"{sum(r['cost'] for r in tail) / max(len(tail), 1):.4f}; curve {path}; checkpoint {ckpt}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    agent = None
    if args.checkpoint:
        trained = load_checkpoint(args.checkpoint)
        agent, cfg = trained.agent, trained.config
    elif args.scheme:
        cfg = cfg.replace(engine={"scheme": args.scheme})
    out = Path(output_dir(args.out, cfg))
    epochs = args.epochs or cfg.experiment.eval_epochs
    for seed in args.seeds or [cfg.engine.seed]:
        c = cfg.replace(engine={"seed": seed})
        engine = Engine(c, agent=agent, training=False)
        rows = engine.run_epochs(epochs)
        name = metrics.run_name(c.engine.scheme, seed)
        metrics.write_epochs(out / f"epochs_{name}.csv", rows)
        metrics.write_sessions(out / f"sessions_{name}.csv", engine.sessions)
        metrics.write_assignments(out / f"assignments_{name}.csv", engine.assignments)
        if engine.policy_log:
            metrics.write_policy_log(out / f"policy_{name}.csv", engine.policy_log)
        twin_log = out / f"twin_{name}.jsonl"
        twin_log.unlink(missing_ok=True)
        for vdt in sorted([*engine.vdts.values(), *engine.departed.values()], key=lambda v: v.endpoint_id):
            dump_events(twin_log, vdt.events)
        cost, sat = metrics.summarize(rows, skip=min(c.experiment.eval_warmup, epochs - 1))
        print(f"{name}: mean cost {cost:.4f}, satisfaction {sat:.4f}")
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"{args.config}: ok ({cfg.topology.n_rsus} RSUs, scheme {cfg.engine.scheme})")
    return 0


COMMANDS = {"run": cmd_run, "train": cmd_train, "evaluate": cmd_evaluate, "validate-config": cmd_validate}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
