import numpy as np
import pytest

from vecdt import kernels

PATHS = [False] + ([True] if kernels._HAVE_NUMBA else [])


@pytest.mark.parametrize("use_numba", PATHS)
def test_status_counts_edges(use_numba):
    m = kernels.status_counts(np.array([0.0, 200.0, 100.0]), np.array([5.0, -30.0, 1.0]),
                              0.0, 200.0, 5.0, 25.0, 3, 3, use_numba=use_numba)
    assert m.sum() == 3
    assert m[0, 0] == 1 and m[2, 2] == 1 and m[1, 0] == 1
    # |speed| is binned: -30 clamps into the top bin, at the right edge
    m2 = kernels.status_counts(np.array([200.0]), np.array([-30.0]), 0.0, 200.0, 5.0, 25.0, 3, 3,
                               use_numba=use_numba)
    assert m2[2, 2] == 1


def test_paths_agree():
    if not kernels._HAVE_NUMBA:
        pytest.skip("numba not installed")
    rng = np.random.default_rng(3)
    x = rng.uniform(0, 200, 500)
    v = rng.uniform(-30, 30, 500)
    assert np.array_equal(kernels.status_counts_np(x, v, 0., 200., 5., 25., 5, 5),
                          kernels.status_counts_nb(x, v, 0., 200., 5., 25., 5, 5))
    args = (x, np.abs(v), 90.0, 12.0, 0.6, -0.8, -40.0, 1.0, 1.0)
    assert np.array_equal(kernels.delivery_mask_np(*args), kernels.delivery_mask_nb(*args))
    offs = rng.integers(0, 10, 300)
    viol = rng.choice([0.0, 1.0, 10.0, 11.0], 300)
    assert kernels.slot_mean_cost_np(offs, viol, 10) == pytest.approx(
        kernels.slot_mean_cost_nb(offs, viol, 10), rel=1e-12)


@pytest.mark.parametrize("use_numba", PATHS)
def test_slot_mean_cost(use_numba):
    assert kernels.slot_mean_cost(np.array([3, 3]), np.array([11.0, 0.0]), 10, use_numba=use_numba) == 0.55
    assert kernels.slot_mean_cost(np.array([], dtype=int), np.array([]), 10, use_numba=use_numba) == 0.0
    with pytest.raises(ValueError):
        kernels.slot_mean_cost(np.array([10]), np.array([1.0]), 10, use_numba=use_numba)


def test_env_flag_selects_numpy(monkeypatch):
    import importlib

    monkeypatch.setenv("VECDT_NUMBA", "0")
    mod = importlib.reload(kernels)
    try:
        assert mod.USE_NUMBA is False
        assert mod._pick(None) is False
    finally:
        monkeypatch.delenv("VECDT_NUMBA")
        importlib.reload(kernels)
