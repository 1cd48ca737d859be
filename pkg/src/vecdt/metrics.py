"""CSV writers for per-session outcomes, per-epoch curves and experiment summaries."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Sequence

from .delay import SessionOutcome

EPOCH_FIELDS = ("epoch", "cost", "satisfaction", "discontinuities", "tasks", "critic_loss", "noise_std")
SUMMARY_FIELDS = ("scheme", "sweep", "value", "seed", "epochs", "mean_cost", "mean_satisfaction")


def run_name(scheme: str, seed: int, sweep: str = "none", value: Optional[float] = None) -> str:
    """File stem identifying one run, e.g. ``dt_matching_compute_rate-0.2_seed3``."""
    parts = [scheme]
    if sweep != "none" and value is not None:
        parts.append(f"{sweep}-{value:g}")
    parts.append(f"seed{seed}")
    return "_".join(parts)


def _fmt(value):
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        return repr(value)
    return value


def write_rows(path, fields: Sequence[str], rows: Iterable[Mapping]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for row in rows:
            w.writerow([_fmt(row[f]) for f in fields])
    return path


def write_sessions(path, sessions: Iterable[SessionOutcome]) -> Path:
    return write_rows(path, SessionOutcome.FIELDS,
                      (dict(zip(SessionOutcome.FIELDS, s.row())) for s in sessions))


def write_epochs(path, rows: Iterable[Mapping]) -> Path:
    return write_rows(path, EPOCH_FIELDS, rows)


def read_rows(path) -> List[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summarize(rows: Sequence[Mapping], skip: int = 0) -> tuple:
    """Mean epoch cost and mean satisfaction, ignoring the first ``skip`` epochs."""
    rows = list(rows)[skip:]
    if not rows:
        return math.nan, math.nan
    cost = sum(r["cost"] for r in rows) / len(rows)
    sat = sum(r["satisfaction"] for r in rows) / len(rows)
    return cost, sat


POLICY_FIELDS = ("epoch", "rsu", "direction", "x_hat", "v_hat", "alpha", "beta", "gamma", "q_ref")
ASSIGNMENT_FIELDS = ("slot", "vehicle", "connected", "delivery_rsu", "processor", "rounds")


def write_policy_log(path, records: Iterable[Mapping]) -> Path:
    return write_rows(path, POLICY_FIELDS, records)


def write_assignments(path, rows: Iterable[Sequence]) -> Path:
    return write_rows(path, ASSIGNMENT_FIELDS, (dict(zip(ASSIGNMENT_FIELDS, r)) for r in rows))
