"""Per-RSU policy maps and the nearest-benchmark delivery rule."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .topology import Direction, Topology

PARAMS_PER_MAP = 6
DIRECTIONS = (Direction.FORWARD, Direction.BACKWARD)


class PolicyMapError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyMap:
    """Point benchmark (deliver locally), line benchmark (deliver at the next RSU)
    and a reference queue length in seconds of work."""

    rsu: int
    epoch: int
    direction: Direction
    x_hat: float
    v_hat: float
    alpha: float
    beta: float
    gamma: float
    q_ref: float

    def __post_init__(self):
        if self.alpha == 0.0 and self.beta == 0.0:
            raise PolicyMapError("line benchmark needs (alpha, beta) != (0, 0)")
        if not self.q_ref >= 0.0:
            raise PolicyMapError("reference queue length must be >= 0")
        vals = (self.x_hat, self.v_hat, self.alpha, self.beta, self.gamma, self.q_ref)
        if not all(math.isfinite(v) for v in vals):
            raise PolicyMapError("policy map parameters must be finite")

    def point_distance(self, x: float, v: float, scale=(1.0, 1.0)) -> float:
        dx = (x - self.x_hat) * scale[0]
        dv = (v - self.v_hat) * scale[1]
        return math.sqrt(dx * dx + dv * dv)

    def line_distance(self, x: float, v: float, scale=(1.0, 1.0)) -> float:
        na = self.alpha / scale[0]
        nb = self.beta / scale[1]
        return abs(self.alpha * x + self.beta * v + self.gamma) / math.sqrt(na * na + nb * nb)

    def as_dict(self) -> dict:
        return {
            "rsu": self.rsu, "epoch": self.epoch, "direction": self.direction.label,
            "x_hat": self.x_hat, "v_hat": self.v_hat, "alpha": self.alpha,
            "beta": self.beta, "gamma": self.gamma, "q_ref": self.q_ref,
        }


def select_delivery_rsu(x: float, v: float, pmap: PolicyMap, connected: int,
                        next_rsu: Optional[int], scale=(1.0, 1.0)) -> int:
    """Pick the RSU whose benchmark is nearest to the vehicle status (x, v).

    Without a next RSU (last cell in the travel direction) the connected RSU
    is returned. Ties keep the connected RSU.
    """
    if next_rsu is None:
        return connected
    if pmap.line_distance(x, v, scale) < pmap.point_distance(x, v, scale):
        return next_rsu
    return connected


def decision_grid(pmap: PolicyMap, xs: np.ndarray, vs: np.ndarray, scale=(1.0, 1.0),
                  use_numba=None) -> np.ndarray:
    """Boolean grid (len(vs) x len(xs)), True where the map migrates to the next RSU."""
    X, V = np.meshgrid(np.asarray(xs, float), np.asarray(vs, float))
    mask = kernels.delivery_mask(X.ravel(), V.ravel(), pmap.x_hat, pmap.v_hat, pmap.alpha,
                                 pmap.beta, pmap.gamma, scale[0], scale[1], use_numba=use_numba)
    return mask.reshape(X.shape)


# --------------------------------------------------------------------------
# Action decoding
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ActionBounds:
    v_min: float
    v_max: float
    q_max: Tuple[float, ...]  # per RSU, seconds

    def __post_init__(self):
        if not 0 <= self.v_min < self.v_max:
            raise PolicyMapError("need 0 <= v_min < v_max")


def action_dim(topology: Topology) -> int:
    return topology.n_rsus * len(DIRECTIONS) * PARAMS_PER_MAP


def starting_action(topology: Topology, line_offset: float) -> np.ndarray:
    """Unit-scale action whose line benchmark sits ``line_offset`` of a half
    cell ahead of the centre in the travel direction; every other entry is at
    its midpoint.

    With ``line_offset = 0`` the point benchmark lies on the line and the
    decision flips for whole regions under arbitrarily small output changes.
    """
    if not 0.0 <= line_offset < 1.0:
        raise PolicyMapError("line_offset must lie in [0, 1)")
    u = np.zeros((topology.n_rsus, len(DIRECTIONS), PARAMS_PER_MAP))
    for d_idx, direction in enumerate(DIRECTIONS):
        u[:, d_idx, 4] = line_offset if direction is Direction.FORWARD else -line_offset
    return u.ravel()


def _to_unit(raw: np.ndarray, squash: bool) -> np.ndarray:
    return np.tanh(raw) if squash else np.clip(raw, -1.0, 1.0)


def _affine(u, lo, hi):
    return lo + 0.5 * (u + 1.0) * (hi - lo)


def decode_action(raw, topology: Topology, bounds: ActionBounds, epoch: int = 0,
                  squash: bool = True) -> Dict[Tuple[int, Direction], PolicyMap]:
    """Map an action vector onto valid policy maps, keyed by (rsu, direction).

    Layout: for each RSU, for forward then backward, six entries
    ``[x_hat, v_hat, angle, line_v, line_x, q_ref]``. Each entry is squashed
    to [-1, 1] (tanh when ``squash`` else clipping) and mapped affinely:
    ``x_hat``/``line_x`` onto the coverage interval, ``v_hat``/``line_v``
    onto the speed range, ``q_ref`` onto ``[0, q_max]``. The line has unit
    normal ``(cos a, sin a)`` with ``a = angle * pi / 2`` and passes through
    ``(line_x, line_v)``, so it always crosses the coverage box.
    """
    raw = np.asarray(raw, dtype=np.float64).ravel()
    if raw.shape[0] != action_dim(topology):
        raise PolicyMapError(f"action has {raw.shape[0]} entries, expected {action_dim(topology)}")
    if not np.all(np.isfinite(raw)):
        raise PolicyMapError("action contains non-finite values")
    u = _to_unit(raw, squash).reshape(topology.n_rsus, len(DIRECTIONS), PARAMS_PER_MAP)
    maps = {}
    for rsu in topology.rsus:
        lo, hi = rsu.coverage
        for d_idx, direction in enumerate(DIRECTIONS):
            p = u[rsu.id, d_idx]
            x_hat = float(_affine(p[0], lo, hi))
            v_hat = float(_affine(p[1], bounds.v_min, bounds.v_max))
            angle = float(p[2]) * math.pi / 2.0
            alpha, beta = math.cos(angle), math.sin(angle)
            lx = float(_affine(p[4], lo, hi))
            lv = float(_affine(p[3], bounds.v_min, bounds.v_max))
            gamma = -(alpha * lx + beta * lv)
            q_ref = float(_affine(p[5], 0.0, bounds.q_max[rsu.id]))
            maps[(rsu.id, direction)] = PolicyMap(
                rsu.id, epoch, direction, x_hat, v_hat, alpha, beta, gamma, q_ref
            )
    return maps


def encode_maps(maps: Dict[Tuple[int, Direction], PolicyMap], topology: Topology,
                bounds: ActionBounds, squash: bool = True) -> np.ndarray:
    """Inverse of :func:`decode_action` where it is invertible.

    The line's anchor point is not unique; this picks the anchor at the
    middle of the speed range, which requires a non-horizontal line.
    """
    u = np.zeros((topology.n_rsus, len(DIRECTIONS), PARAMS_PER_MAP))
    for rsu in topology.rsus:
        lo, hi = rsu.coverage
        for d_idx, direction in enumerate(DIRECTIONS):
            m = maps[(rsu.id, direction)]
            norm = math.hypot(m.alpha, m.beta)
            a, b, g = m.alpha / norm, m.beta / norm, m.gamma / norm
            if a < 0 or (a == 0 and b < 0):
                a, b, g = -a, -b, -g
            if a == 0:
                raise PolicyMapError("cannot encode a horizontal line benchmark")
            lv = 0.5 * (bounds.v_min + bounds.v_max)
            lx = -(b * lv + g) / a
            u[rsu.id, d_idx] = [
                _inv_affine(m.x_hat, lo, hi),
                _inv_affine(m.v_hat, bounds.v_min, bounds.v_max),
                math.atan2(b, a) / (math.pi / 2.0),
                _inv_affine(lv, bounds.v_min, bounds.v_max),
                _inv_affine(lx, lo, hi),
                _inv_affine(m.q_ref, 0.0, bounds.q_max[rsu.id]),
            ]
    u = u.ravel()
    if squash:
        if np.any(np.abs(u) >= 1.0):
            raise PolicyMapError("parameter at a range bound has no finite pre-image")
        return np.arctanh(u)
    return u


def _inv_affine(value, lo, hi):
    return 2.0 * (value - lo) / (hi - lo) - 1.0
