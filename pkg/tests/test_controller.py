import dataclasses

import numpy as np
import pytest

from conftest import random_configuration
from safeforce.controller import ControllerConfig, PAPER_EPS, default_config, evaluate
from safeforce.environment import Spring
from safeforce.errors import ContractError
from safeforce.kinematics import forward_kinematics
from safeforce.limits import limit_preset
from safeforce.simulator import PlantForce, RecordedForce, run_scenario


def safe_points(sc, rng, count, z_range=(0.0, 2.0)):
    """Random configurations shifted along the normal so that B lies in
    ``z_range``; joints stay strictly inside their limits."""
    out = []
    while len(out) < count:
        q = random_configuration(rng, sc)
        ev = evaluate(q, 0.0, sc.model, sc.shaping, sc.controller)
        q[2] += -ev.B + rng.uniform(*z_range)
        out.append(q)
    return out


@pytest.mark.parametrize("which", ["vertical", "inclined"])
def test_moves_toward_surface_when_far(which, request):
    sc = request.getfixturevalue(which)
    rng = np.random.default_rng(40)
    for q in safe_points(sc, rng, 100, (0.5, 2.0)):
        ev = evaluate(q, 0.0, sc.model, sc.shaping, sc.controller)
        assert ev.solution.feasible
        assert ev.grad_Z @ ev.u < 0


@pytest.mark.parametrize("which", ["vertical", "inclined"])
def test_force_potential_certificate(which, request):
    # zero is feasible in the safe set, so the optimum cannot beat it:
    # v (gZ.u) + (gZ.u)^2 / 2 + u'Eu / 2 <= 0 with v the force-potential slope
    sc = request.getfixturevalue(which)
    rng = np.random.default_rng(41)
    E = sc.controller.E_diag
    for q in safe_points(sc, rng, 200, (0.0, 1.0)):
        F = sc.force_model(forward_kinematics(q, sc.model).Z)
        ev = evaluate(q, F, sc.model, sc.shaping, sc.controller)
        s = ev.grad_Z @ ev.u
        cert = ev.dVF * s + 0.5 * s * s + 0.5 * ev.u @ (E * ev.u)
        assert cert <= 1e-12 * max(1.0, ev.dVF ** 2)


@pytest.mark.parametrize("which", ["vertical", "inclined"])
def test_alignment_non_increasing_with_free_normal_rate(which, request):
    sc = request.getfixturevalue(which)
    assert sc.controller.limits.z_unbounded
    rng = np.random.default_rng(42)
    for q in safe_points(sc, rng, 200, (0.0, 1.0)):
        F = sc.force_model(forward_kinematics(q, sc.model).Z)
        ev = evaluate(q, F, sc.model, sc.shaping, sc.controller)
        assert ev.grad_A @ ev.u <= 1e-10


@pytest.mark.parametrize("which", ["vertical", "inclined"])
def test_barrier_dual_equals_closed_loop_force_rate(which, request):
    # stationarity in the free normal coordinate: lambda = gZ.u + kappa_F
    sc = request.getfixturevalue(which)
    rng = np.random.default_rng(43)
    for q in safe_points(sc, rng, 100, (0.0, 0.5)):
        F = sc.force_model(forward_kinematics(q, sc.model).Z)
        ev = evaluate(q, F, sc.model, sc.shaping, sc.controller)
        lam = ev.solution.scaled(0.5).lam
        assert lam == pytest.approx(ev.grad_Z @ ev.u + ev.dVF, abs=1e-9)


def test_evaluation_is_deterministic(vertical):
    q = random_configuration(np.random.default_rng(44), vertical)
    a = evaluate(q, -1.0, vertical.model, vertical.shaping, vertical.controller)
    b = evaluate(q, -1.0, vertical.model, vertical.shaping, vertical.controller)
    assert np.array_equal(a.u, b.u) and a.solution.lam == b.solution.lam


def test_infeasible_start_holds_position():
    from safeforce.scenarios import preset_scenario

    sc = preset_scenario("exp1-bz")
    q = sc.q0.copy()
    ev = evaluate(q, 0.0, sc.model, sc.shaping, sc.controller)
    q[2] -= ev.B + 5.0  # far behind the barrier with a capped normal rate
    ev = evaluate(q, 0.0, sc.model, sc.shaping, sc.controller)
    assert ev.solution.status == "infeasible"
    assert ev.solution.margin < 0
    assert np.array_equal(ev.u, np.zeros(6))


def test_controller_only_sees_force_readings(vertical):
    cfg = dataclasses.replace(vertical, duration=3.0)
    plant = PlantForce(cfg.force_model)
    a = run_scenario(cfg, force_source=plant)
    # replay the readings against a different ground-truth model
    other = dataclasses.replace(cfg, force_model=Spring(1000.0))
    b = run_scenario(other, force_source=RecordedForce(plant.record))
    assert np.array_equal(a.q, b.q) and np.array_equal(a.u, b.u)


def test_controller_config_validation():
    lim = limit_preset()
    assert np.array_equal(default_config().E_diag, PAPER_EPS)
    with pytest.raises(ContractError):
        ControllerConfig(lim, np.array([0.1, 0.1, 0.1, 0.1, 0.1, 0.1]))
    with pytest.raises(ContractError):
        ControllerConfig(lim, np.array([0.1, 0.1, 0.0, 0.1, 0.1]))
    with pytest.raises(ContractError):
        ControllerConfig(lim, np.array([0.1, 0.0, 0.0, 0.1, 0.1, 0.1]))
