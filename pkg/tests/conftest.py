import numpy as np
import pytest

from vecdt.config import default_config
from vecdt.topology import uniform_topology


@pytest.fixture
def topo():
    """Six 200 m cells on a 1.2 km road, half-second slots, ten per epoch."""
    return uniform_topology(6, 1200.0, compute_rate=0.4, uplink_rate=0.4, wired_rate=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_config():
    """Default scenario trimmed for quick engine runs."""
    return default_config().replace(
        ddpg={"actor_hidden": (16,), "critic_hidden": (16,), "batch_size": 8, "warmup": 8},
    )



# -- acceptance report: one line per criterion ------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    report = outcome.get_result()
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "ran": False, "seconds": 0.0, "why": ""})
    if report.when == "call" or report.failed:
        entry["ran"] = True
        entry["seconds"] += report.duration
        if not report.passed:
            entry["ok"] = False
            if not entry["why"] and call.excinfo is not None:
                entry["why"] = str(call.excinfo.value).splitlines()[0][:160]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = ("PASS" if e["ok"] else "FAIL") if e["ran"] else "SKIP"
        line = f"criterion {number}: {status}  {e['title']}  ({e['seconds']:.1f} s)"
        if e["why"]:
            line += f"  -- {e['why']}"
        terminalreporter.write_line(line)
