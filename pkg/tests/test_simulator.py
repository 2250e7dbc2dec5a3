import dataclasses
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.linalg import expm

from safeforce.controller import PAPER_EPS
from safeforce.environment import Spring
from safeforce.errors import ContractError
from safeforce.scenarios import preset_scenario
from safeforce.simulator import (
    TrajectoryParseError, Waypoints, emit_csv, parse_csv, run_scenario, stable_dt, step,
)


class LinearField:
    """Stand-in controller returning u = M q, to study the integrator alone."""

    def __init__(self, M):
        self.M = M

    def __call__(self, t, q, source):
        sol = SimpleNamespace(feasible=True, mu=self.M @ q)
        return SimpleNamespace(solution=sol), 0.0, (0.0, 0.0)


def integrate_linear(M, q0, T, dt):
    q = q0.copy()
    ctrl = LinearField(M)
    for k in range(int(round(T / dt))):
        q, _, ok = step(k * dt, q, ctrl, None, dt)
        assert ok
    return q


def test_zero_control_keeps_configuration():
    q0 = np.array([0.1, -0.2, 0.3, 1.0, 0.2, -0.4])
    assert np.array_equal(integrate_linear(np.zeros((6, 6)), q0, 1.0, 0.1), q0)


def test_rk4_is_fourth_order():
    rng = np.random.default_rng(50)
    M = rng.normal(size=(6, 6)) * 0.5
    q0 = rng.normal(size=6)
    exact = expm(M) @ q0
    errs = [np.max(np.abs(integrate_linear(M, q0, 1.0, dt) - exact)) for dt in (0.1, 0.05, 0.025)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 3.8) and np.all(orders < 4.3)


def test_infeasible_stage_holds_step():
    class Never:
        def __call__(self, t, q, source):
            return SimpleNamespace(solution=SimpleNamespace(feasible=False, mu=None)), 0.0, (0.0, 0.0)

    q = np.ones(6)
    q_next, _, ok = step(0.0, q, Never(), None, 0.1)
    assert not ok and np.array_equal(q_next, q)
    with pytest.raises(ContractError):
        step(0.0, q, Never(), None, 0.0)


@pytest.fixture(scope="module")
def short_run():
    cfg = dataclasses.replace(preset_scenario("exp1"), duration=2.0)
    return cfg, run_scenario(cfg)


def test_csv_round_trip(short_run):
    _, traj = short_run
    text = emit_csv(traj)
    back = parse_csv(text)
    assert emit_csv(back) == text
    for name in ("t", "q", "u", "F", "B", "V_F"):
        assert np.array_equal(getattr(back, name), getattr(traj, name))
    assert back.status == traj.status and back.meta == traj.meta


def test_runs_are_byte_identical(short_run):
    cfg, traj = short_run
    assert emit_csv(run_scenario(cfg)) == emit_csv(traj)


def test_csv_parse_errors(short_run):
    text = emit_csv(short_run[1])
    lines = text.splitlines()
    bad = {
        "missing meta": "\n".join(lines[1:]),
        "bad header": "\n".join([lines[0], lines[1].replace("q_x", "qx")] + lines[2:]),
        "short row": "\n".join(lines[:3] + [lines[3].rsplit(",", 2)[0]]),
        "non-finite": "\n".join(lines[:2] + [lines[2].replace("0.000000000", "nan", 1)] + lines[3:]),
        "no samples": "\n".join(lines[:2]),
    }
    for label, t in bad.items():
        with pytest.raises(TrajectoryParseError):
            parse_csv(t)


def test_waypoints_blend_and_hold():
    w = Waypoints((0.0, 10.0, 20.0), (0.0, 1.0, 1.0), (0.0, 0.0, 2.0))
    assert w.at(-1.0) == (0.0, 0.0) and w.at(25.0) == (1.0, 2.0)
    assert w.at(5.0) == pytest.approx((0.5, 0.0))
    assert w.rate(0.0) == (0.0, 0.0) and w.rate(10.0)[0] == pytest.approx(0.0, abs=1e-15)
    assert w.rate(30.0) == (0.0, 0.0)
    for t in np.linspace(0.3, 19.7, 25):
        h = 1e-6
        fd = (np.array(w.at(t + h)) - np.array(w.at(t - h))) / (2 * h)
        assert np.allclose(w.rate(t), fd, atol=1e-7)
    with pytest.raises(ContractError):
        Waypoints((0.0, 0.0), (0.0, 1.0), (0.0, 1.0))


def test_disturbance_is_logged():
    cfg = preset_scenario("exp1", duration=1.0, disturbances=[{"t": 0.5, "dq": [0, 0, -0.1, 0, 0, 0]}])
    traj = run_scenario(cfg)
    k = int(np.flatnonzero(np.array(traj.event) == "disturbance")[0])
    assert traj.t[k] == pytest.approx(0.5)
    assert traj.q[k, 2] < traj.q[k - 1, 2] - 0.09


def test_stable_step_rule():
    assert stable_dt(Spring(300.0), -3.0, 1 / 60) == 1 / 60
    dt = stable_dt(Spring(1.0e5), -3.0, 1 / 60)
    assert dt == 1.0 / np.ceil(1.0e5 / 30.0)
    assert 1.0e5 * dt <= 30.0


def test_listed_regularisation_chatters_through_barrier():
    # the tiny listed weights let the 60 Hz loop cross the barrier by ~0.09 m
    traj = run_scenario(preset_scenario("exp1", regularisation=list(PAPER_EPS)))
    assert traj.B.min() < -0.05


def test_linear_barrier_rate_recovers_too_slowly():
    # a linear rate only approaches B = 0 exponentially from below
    traj = run_scenario(preset_scenario("exp2", shaping={"preset": "paper-exp"}, duration=10.0))
    assert traj.B[-1] < 0
