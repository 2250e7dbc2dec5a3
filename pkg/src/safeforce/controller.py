"""The full control law: kinematics, task functions, bounds, QP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qp as qpmod
from .errors import ContractError
from .kinematics import as_configuration, gradients_from_state, _chain
from .limits import LimitConfig, limit_preset, velocity_bounds
from .task import alignment, alignment_gradient, barrier, dVF_drZ, task_coordinates

PAPER_EPS = (0.04, 0.04, 0.0, 4e-5, 3e-6, 3e-6)


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    """Limits plus the diagonal regularisation weights (one per coordinate;
    the weight on z must be 0)."""

    limits: LimitConfig
    E_diag: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.E_diag, dtype=float).reshape(-1)
        if e.shape[0] != 4 + self.limits.q_m_lower.shape[0]:
            raise ContractError("E_diag length must equal 4 + number of arm joints")
        if e[2] != 0.0:
            raise ContractError("E_diag entry for z must be exactly 0")
        if np.any(np.delete(e, 2) <= 0):
            raise ContractError("E_diag entries other than z must be positive")
        object.__setattr__(self, "E_diag", e)


def default_config(limits="paper-exp"):
    return ControllerConfig(limit_preset(limits), np.array(PAPER_EPS))


@dataclass(frozen=True, eq=False)
class ControlEvaluation:
    """Everything computed on the way to one control value."""

    solution: qpmod.QPSolution
    problem: qpmod.QPProblem
    Z: float
    A: float
    B: float
    r_O: float
    dVF: float
    grad_Z: np.ndarray
    grad_A: np.ndarray
    grad_B: np.ndarray

    @property
    def u(self):
        """Applied rate: the QP solution, or zero when infeasible."""
        if self.solution.feasible:
            return self.solution.mu
        return np.zeros_like(self.grad_Z)


def barrier_time_derivative(tc, A, xy_ref_rate, shaping):
    """Explicit dB/dt caused by a moving in-plane target."""
    if xy_ref_rate is None or (xy_ref_rate[0] == 0 and xy_ref_rate[1] == 0):
        return 0.0
    gx, gy = shaping.V_A_XY.grad(tc.r_X, tc.r_Y)
    dA_dt = -(gx * xy_ref_rate[0] + gy * xy_ref_rate[1])
    return -shaping.kappa_A.deriv(A) * dA_dt


def evaluate(q, F_measured, model, shaping, cfg, xy_ref=(0.0, 0.0), xy_ref_rate=None, warm_start=None, kin=None):
    """Run the pipeline and keep the intermediate quantities.

    ``warm_start`` is an active set from an earlier solve; it only changes how
    fast the unique minimiser is found.  ``kin`` is an already computed
    kinematic state for ``q``, to avoid a second pass over the chain.
    """
    q = as_configuration(q, model)
    ks = _chain(q, model) if kin is None else kin
    grads = gradients_from_state(ks, model)
    tc = task_coordinates(ks.ee, 0.0, xy_ref)
    A = alignment(tc, shaping)
    gA = alignment_gradient(tc, grads, shaping)
    bs = barrier(q, ks.ee, A, shaping, grads, gA)
    dVF = dVF_drZ(ks.ee.Z, F_measured, shaping)
    bounds = velocity_bounds(q, cfg.limits)
    ff = barrier_time_derivative(tc, A, xy_ref_rate, shaping)
    prob = qpmod.assemble(grads.Z, bs.grad_B, bs.B, dVF, bounds, cfg.E_diag, shaping, ff)
    sol = qpmod.solve(prob, active_set=warm_start)
    return ControlEvaluation(sol, prob, bs.Z, A, bs.B, tc.r_O, dVF, grads.Z, gA, bs.grad_B)


def control(q, F_measured, model, shaping, cfg, xy_ref=(0.0, 0.0), xy_ref_rate=None):
    """The control rate for configuration ``q`` given the measured normal force.

    Returns the QP solution; an infeasible status is reported, not raised.
    """
    return evaluate(q, F_measured, model, shaping, cfg, xy_ref, xy_ref_rate).solution
