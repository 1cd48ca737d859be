"""Numeric inner loops with a numba path and a pure-numpy fallback.

The numba path is the default when numba imports cleanly. Set
``VECDT_NUMBA=0`` in the environment to force the numpy path (useful for
debugging and for the equivalence tests, which exercise both).
"""

import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a soft dependency
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("VECDT_NUMBA", "1").lower() not in (
    "0",
    "false",
    "no",
    "off",
)


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------


def _bin_index_np(values, lo, hi, n):
    width = hi - lo
    idx = np.floor((values - lo) / width * n).astype(np.int64)
    return np.clip(idx, 0, n - 1)


def status_counts_np(locations, speeds, x_lo, x_hi, v_lo, v_hi, n_x, n_v):
    counts = np.zeros((n_x, n_v), dtype=np.int64)
    if len(locations) == 0:
        return counts
    speeds = np.clip(np.abs(speeds), v_lo, v_hi)
    xi = _bin_index_np(np.asarray(locations, dtype=np.float64), x_lo, x_hi, n_x)
    vi = _bin_index_np(speeds, v_lo, v_hi, n_v)
    np.add.at(counts, (xi, vi), 1)
    return counts


def delivery_mask_np(xs, vs, x_hat, v_hat, alpha, beta, gamma, sx, sv):
    """True where the line benchmark is strictly closer than the point one."""
    dx = (xs - x_hat) * sx
    dv = (vs - v_hat) * sv
    d_point = np.sqrt(dx * dx + dv * dv)
    na = alpha / sx
    nb = beta / sv
    d_line = np.abs(alpha * xs + beta * vs + gamma) / np.sqrt(na * na + nb * nb)
    return d_line < d_point


def slot_mean_cost_np(slot_offsets, violations, n_slots):
    """Per-epoch cost: mean over slots of the per-slot mean violation.

    Slots without any offloaded task contribute zero.
    """
    if n_slots <= 0:
        return 0.0
    sums = np.bincount(slot_offsets, weights=violations, minlength=n_slots)[:n_slots]
    counts = np.bincount(slot_offsets, minlength=n_slots)[:n_slots]
    per_slot = np.divide(sums, counts, out=np.zeros(n_slots), where=counts > 0)
    # sequential sum so both paths round identically
    total = 0.0
    for s in range(n_slots):
        total += float(per_slot[s])
    return total / n_slots


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if _HAVE_NUMBA:

    @njit(cache=True)
    def _bin_index_nb(value, lo, hi, n):
        i = int(np.floor((value - lo) / (hi - lo) * n))
        if i < 0:
            return 0
        if i > n - 1:
            return n - 1
        return i

    @njit(cache=True)
    def status_counts_nb(locations, speeds, x_lo, x_hi, v_lo, v_hi, n_x, n_v):
        counts = np.zeros((n_x, n_v), dtype=np.int64)
        for k in range(locations.shape[0]):
            v = abs(speeds[k])
            if v < v_lo:
                v = v_lo
            elif v > v_hi:
                v = v_hi
            xi = _bin_index_nb(locations[k], x_lo, x_hi, n_x)
            vi = _bin_index_nb(v, v_lo, v_hi, n_v)
            counts[xi, vi] += 1
        return counts

    @njit(cache=True)
    def delivery_mask_nb(xs, vs, x_hat, v_hat, alpha, beta, gamma, sx, sv):
        out = np.empty(xs.shape[0], dtype=np.bool_)
        na = alpha / sx
        nb = beta / sv
        norm = np.sqrt(na * na + nb * nb)
        for k in range(xs.shape[0]):
            dx = (xs[k] - x_hat) * sx
            dv = (vs[k] - v_hat) * sv
            d_point = np.sqrt(dx * dx + dv * dv)
            d_line = abs(alpha * xs[k] + beta * vs[k] + gamma) / norm
            out[k] = d_line < d_point
        return out

    @njit(cache=True)
    def slot_mean_cost_nb(slot_offsets, violations, n_slots):
        if n_slots <= 0:
            return 0.0
        sums = np.zeros(n_slots)
        counts = np.zeros(n_slots, dtype=np.int64)
        for k in range(slot_offsets.shape[0]):
            s = slot_offsets[k]
            if 0 <= s < n_slots:
                sums[s] += violations[k]
                counts[s] += 1
        total = 0.0
        for s in range(n_slots):
            if counts[s] > 0:
                total += sums[s] / counts[s]
        return total / n_slots


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------


def status_counts(locations, speeds, x_lo, x_hi, v_lo, v_hi, n_x, n_v, use_numba=None):
    """X-by-V histogram of (location, |speed|) pairs over a coverage box.

    Locations bin uniformly over ``[x_lo, x_hi]`` and speeds over
    ``[v_lo, v_hi]``; out-of-range values fall into the edge bins.
    """
    locations = np.ascontiguousarray(locations, dtype=np.float64)
    speeds = np.ascontiguousarray(speeds, dtype=np.float64)
    fn = status_counts_nb if _pick(use_numba) else status_counts_np
    return fn(locations, speeds, float(x_lo), float(x_hi), float(v_lo), float(v_hi), int(n_x), int(n_v))


def delivery_mask(xs, vs, x_hat, v_hat, alpha, beta, gamma, sx=1.0, sv=1.0, use_numba=None):
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    vs = np.ascontiguousarray(vs, dtype=np.float64)
    fn = delivery_mask_nb if _pick(use_numba) else delivery_mask_np
    return fn(xs, vs, float(x_hat), float(v_hat), float(alpha), float(beta), float(gamma), float(sx), float(sv))


def slot_mean_cost(slot_offsets, violations, n_slots, use_numba=None):
    slot_offsets = np.ascontiguousarray(slot_offsets, dtype=np.int64)
    violations = np.ascontiguousarray(violations, dtype=np.float64)
    if slot_offsets.size and (slot_offsets.min() < 0 or slot_offsets.max() >= n_slots):
        raise ValueError("slot offset outside the epoch")
    fn = slot_mean_cost_nb if _pick(use_numba) else slot_mean_cost_np
    return float(fn(slot_offsets, violations, int(n_slots)))


def _pick(use_numba):
    if use_numba is None:
        return USE_NUMBA
    if use_numba and not _HAVE_NUMBA:
        raise RuntimeError("numba requested but not importable")
    return bool(use_numba)
