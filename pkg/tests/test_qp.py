import json
import time

import numpy as np
import pytest

from oracles import box_lp_by_vertices, kkt_violation, projected_gradient_qp, random_controller_qp
from safeforce.errors import ContractError
from safeforce.limits import Bounds
from safeforce.qp import QPProblem, assemble, dump_record, kkt_residual, solve
from safeforce.shaping import preset

SH = preset("paper-exp")


def problem(inst):
    return QPProblem(inst["H"], inst["f"], inst["c"], inst["d"], Bounds(inst["lo"], inst["hi"]), inst["e"])


def check(inst, sol):
    return kkt_violation(inst["H"], inst["f"], inst["c"], inst["d"], inst["lo"], inst["hi"],
                         sol.mu, sol.lam, sol.lam_lower, sol.lam_upper)


def test_assemble_structure():
    rng = np.random.default_rng(30)
    g, c = rng.normal(size=6), rng.normal(size=6)
    e = np.array([0.1, 0.1, 0.0, 0.05, 0.05, 0.05])
    b = Bounds(-np.ones(6), np.ones(6))
    p = assemble(g, c, 0.2, 0.7, b, e, SH)
    assert np.array_equal(p.H, 2.0 * (np.outer(g, g) + np.diag(e)))
    assert np.array_equal(p.f, 1.4 * g)
    assert p.cbf_rhs == -SH.kappa_B(0.2)
    assert assemble(g, c, 0.2, 0.7, b, e, SH, barrier_rate_ff=0.5).cbf_rhs == -SH.kappa_B(0.2) - 0.5


def test_objective_equals_resolved_rate_cost():
    rng = np.random.default_rng(31)
    for _ in range(100):
        g, c, mu = rng.normal(size=(3, 6))
        e = rng.uniform(0.01, 1, 6)
        e[2] = 0.0
        v = rng.normal()
        p = assemble(g, c, 0.1, v, Bounds(-np.ones(6), np.ones(6)), e, SH)
        W = (g @ mu + v) ** 2 + mu @ (e * mu)
        assert p.objective(mu) == pytest.approx(W, rel=1e-12, abs=1e-12)


def test_assemble_rejects_bad_weights():
    b = Bounds(-np.ones(3), np.ones(3))
    with pytest.raises(ContractError):
        assemble(np.ones(3), np.ones(3), 0.0, 0.0, b, np.array([1.0, 1.0, 0.5]), SH)
    with pytest.raises(ContractError):
        assemble(np.ones(3), np.ones(3), 0.0, 0.0, b, np.array([1.0, -1.0, 0.0]), SH)
    with pytest.raises(ContractError):
        assemble(np.ones(3), np.ones(2), 0.0, 0.0, b, np.array([1.0, 1.0, 0.0]), SH)


def test_one_dimensional_closed_form():
    rng = np.random.default_rng(32)
    for _ in range(200):
        h, fv, c = rng.uniform(0.1, 3), rng.normal(), rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 2)
        lo, hi = -rng.uniform(0.1, 2), rng.uniform(0.1, 2)
        d = rng.uniform(min(c * lo, c * hi), max(c * lo, c * hi))
        # c mu >= d is a one-sided bound on mu
        a, b = (max(lo, d / c), hi) if c > 0 else (lo, min(hi, d / c))
        expect = min(max(-fv / h, a), b)
        sol = solve(QPProblem(np.array([[h]]), np.array([fv]), np.array([c]), d, Bounds(np.array([lo]), np.array([hi]))))
        assert sol.mu[0] == pytest.approx(expect, abs=1e-12)


def test_matches_projected_gradient_oracle():
    rng = np.random.default_rng(33)
    for _ in range(150):
        inst = random_controller_qp(rng)
        sol = solve(problem(inst))
        assert sol.feasible
        ref = projected_gradient_qp(inst["H"], inst["f"], inst["c"], inst["d"], inst["lo"], inst["hi"])
        assert np.max(np.abs(sol.mu - ref)) <= 1e-6
        assert check(inst, sol) <= 1e-8
        assert kkt_residual(problem(inst), sol) == pytest.approx(sol.kkt_residual)


def test_warm_starts_reach_the_same_minimiser():
    rng = np.random.default_rng(34)
    for _ in range(30):
        inst = random_controller_qp(rng)
        p = problem(inst)
        base = solve(p)
        n = p.n
        for _ in range(10):
            guess = [("cbf")] if rng.random() < 0.5 else []
            for i in range(n):
                r = rng.random()
                if r < 0.3:
                    guess.append((i, "lower"))
                elif r < 0.6:
                    guess.append((i, "upper"))
            sol = solve(p, active_set=tuple(guess))
            assert np.max(np.abs(sol.mu - base.mu)) <= 1e-9
        assert solve(p, active_set=base.active_set).iterations <= 2


def test_infeasible_status_carries_certificate():
    rng = np.random.default_rng(35)
    for _ in range(50):
        inst = random_controller_qp(rng)
        inst["lo"][2], inst["hi"][2] = -1.0, 1.0
        cap = box_lp_by_vertices(inst["c"], inst["lo"], inst["hi"])
        inst["d"] = cap + rng.uniform(1e-6, 1.0)
        sol = solve(problem(inst))
        assert sol.status == "infeasible" and not sol.feasible
        assert sol.margin == pytest.approx(cap - inst["d"], abs=1e-12)
        assert sol.margin < 0


def test_non_positive_definite_hessian_raises():
    g = np.array([1.0, 0.5, 0.0])
    e = np.array([0.1, 0.1, 0.0])
    p = assemble(g, np.ones(3), 0.1, 0.3, Bounds(-np.ones(3), np.ones(3)), e, SH)
    with pytest.raises(ContractError):
        solve(p)


def test_halved_duals():
    inst = random_controller_qp(np.random.default_rng(36))
    sol = solve(problem(inst))
    half = sol.scaled(0.5)
    assert half.lam == 0.5 * sol.lam
    assert np.array_equal(half.lam_lower, 0.5 * sol.lam_lower)
    assert np.array_equal(half.mu, sol.mu)


def test_dump_record_is_json_with_string_infinities():
    rng = np.random.default_rng(37)
    while True:
        inst = random_controller_qp(rng)
        if np.isinf(inst["hi"][2]):
            break
    rec = json.loads(dump_record(problem(inst), solve(problem(inst)), t=0.5))
    assert rec["upper"][2] == "inf" and rec["lower"][2] == "-inf"
    assert rec["status"] == "feasible" and rec["t"] == 0.5
    assert len(rec["mu"]) == rec["n"] == inst["c"].size
    assert np.allclose(rec["H"], inst["H"], rtol=0, atol=0)


def test_solve_time_is_small():
    rng = np.random.default_rng(38)
    probs = [problem(random_controller_qp(rng)) for _ in range(200)]
    times = []
    for p in probs:
        t0 = time.perf_counter()
        solve(p)
        times.append(time.perf_counter() - t0)
    assert np.median(times) <= 1e-3
