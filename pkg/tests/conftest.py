import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from safeforce.scenarios import preset_scenario  # noqa: E402

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    n, text = mark.args
    ok = rep.passed if rep.when == "call" else False
    prev = _CRITERIA.get(n, (True, text))
    _CRITERIA[n] = (prev[0] and ok, text)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, text = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}")


@pytest.fixture(scope="session")
def vertical():
    return preset_scenario("exp1")


@pytest.fixture(scope="session")
def inclined():
    return preset_scenario("exp3")


def random_configuration(rng, cfg, z_range=(-0.05, 2.0), joint_frac=0.95):
    """Configuration with the vehicle in front of the plane and the joints
    inside ``joint_frac`` of their range."""
    lim = cfg.controller.limits
    q_m = rng.uniform(lim.q_m_lower * joint_frac, lim.q_m_upper * joint_frac)
    return np.concatenate([
        rng.uniform(-1.0, 1.0, 2), [rng.uniform(*z_range)], [rng.uniform(-np.pi, np.pi)], q_m,
    ])
