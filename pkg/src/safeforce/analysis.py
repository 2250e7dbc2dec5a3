"""Equilibrium classification, KKT-like verification at rest points, and
trajectory audits of the safety and monotonicity guarantees."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controller import evaluate
from .environment import insertion_for_force
from .errors import ContractError
from .kinematics import E_Z, _chain, as_configuration
from .limits import feasibility_margin, velocity_bounds

NEAR_SUCCESS = "NearSuccess"
SPURIOUS = "Spurious"
NOT_EQUILIBRIUM = "NotEquilibrium"
NOT_APPLICABLE = "NotApplicable"

TOL_EQ = 1e-8
TOL_COND = 1e-6


@dataclass(frozen=True, eq=False)
class ControllerContext:
    """What the closed loop needs to be evaluated at a single configuration.

    ``force_model`` plays the plant: it supplies the measured force and the
    true insertion Z_d used by the set definitions.
    """

    model: object
    shaping: object
    cfg: object
    force_model: object

    @property
    def Z_d(self):
        return insertion_for_force(self.shaping.F_d, self.force_model)


@dataclass(frozen=True)
class Condition:
    name: str
    ok: bool
    residual: float


@dataclass(frozen=True, eq=False)
class EquilibriumReport:
    kind: str
    control_norm: float
    near_success: tuple = ()
    spurious: tuple = ()
    margin: float = 0.0
    evaluation: object = None

    @property
    def is_equilibrium(self):
        return self.kind in (NEAR_SUCCESS, SPURIOUS)

    def consistent(self, tol_eq=TOL_EQ):
        """Set membership agrees with the control norm test."""
        if self.kind == NOT_APPLICABLE:
            return True
        return self.is_equilibrium == (self.control_norm <= tol_eq)


def _joint_sign_residual(s, q_m, lo, hi, tol):
    """Worst violation of the saturation sign rule for the alignment slope ``s``."""
    worst = 0.0
    for sj, qj, l, h in zip(s, q_m, lo, hi):
        if abs(qj - l) <= tol:
            worst = max(worst, -sj)
        elif abs(qj - h) <= tol:
            worst = max(worst, sj)
        else:
            worst = max(worst, abs(sj))
    return worst


def classify_equilibrium(q, ctx, F_measured=None, tol_eq=TOL_EQ, tol=TOL_COND):
    """Decide which rest set (if any) ``q`` belongs to and cross-check with
    the control norm.

    ``F_measured`` defaults to the context's force model at the tool position.
    The force-target condition is tested on the force (F = F_d), the form the
    controller actually sees.
    """
    model, shaping, cfg = ctx.model, ctx.shaping, ctx.cfg
    q = as_configuration(q, model)
    ks = _chain(q, model)
    ee = ks.ee
    F = float(ctx.force_model(ee.Z)) if F_measured is None else float(F_measured)
    ev = evaluate(q, F, model, shaping, cfg, kin=ks)
    bounds = velocity_bounds(q, cfg.limits)
    margin = feasibility_margin(q, ev.grad_B, ev.B, bounds, shaping)
    if margin < 0:
        return EquilibriumReport(NOT_APPLICABLE, float("nan"), margin=margin, evaluation=ev)
    norm = float(np.linalg.norm(ev.solution.mu))

    Z_d = ctx.Z_d
    q_m = q[4:]
    lo, hi = cfg.limits.q_m_lower, cfg.limits.q_m_upper
    contain = float(max(0.0, np.max(lo - q_m), np.max(q_m - hi)))
    A_max = shaping.max_alignment(Z_d)
    near = (
        Condition("force at target", abs(F - shaping.F_d) <= tol, abs(F - shaping.F_d)),
        Condition("alignment within terminal bound", ev.A <= A_max + tol, max(0.0, ev.A - A_max)),
        Condition("joints within limits", contain <= tol, contain),
    )

    zt = ee.z_axis
    r_X, r_Y = ee.X, ee.Y
    slopes = np.array([float(np.cross(E_Z, ax) @ zt) for ax in ks.joint_axes])
    slopes[~model._kinds] = 0.0
    sign_res = _joint_sign_residual(slopes, q_m, lo, hi, tol)
    gap = F - shaping.F_d
    spur = (
        Condition("out of contact short of target", gap > tol and ee.Z > Z_d, max(0.0, tol - gap)),
        Condition("in-plane position at target", max(abs(r_X), abs(r_Y)) <= tol, max(abs(r_X), abs(r_Y))),
        Condition("tool axis coplanar with normal and yaw axis", abs(model.a_y @ zt) <= tol, abs(model.a_y @ zt)),
        Condition("on the barrier boundary", abs(ev.B) <= tol, abs(ev.B)),
        Condition("joint saturation signs", sign_res <= tol, sign_res),
        Condition("joints within limits", contain <= tol, contain),
    )
    if all(c.ok for c in near):
        kind = NEAR_SUCCESS
    elif all(c.ok for c in spur):
        kind = SPURIOUS
    else:
        kind = NOT_EQUILIBRIUM
    return EquilibriumReport(kind, norm, near, spur, margin, ev)


@dataclass(frozen=True)
class SKKTReport:
    residuals: dict
    tol: float

    @property
    def ok(self):
        return all(v <= self.tol for v in self.residuals.values())


def verify_skkt(q, ctx, F_measured=None, tol=TOL_COND, tol_eq=TOL_EQ):
    """Check the reduced KKT conditions that characterise rest points.

    Duals are taken from the solver and halved to the scale of the original
    objective.  Raises ``ContractError`` when ``q`` is not a rest point.
    """
    model, shaping, cfg = ctx.model, ctx.shaping, ctx.cfg
    q = as_configuration(q, model)
    ks = _chain(q, model)
    F = float(ctx.force_model(ks.ee.Z)) if F_measured is None else float(F_measured)
    ev = evaluate(q, F, model, shaping, cfg, kin=ks)
    if not ev.solution.feasible:
        raise ContractError("configuration is outside the feasible set")
    if np.linalg.norm(ev.solution.mu) > tol_eq:
        raise ContractError("control is not zero here; the rest-point conditions do not apply")
    sol = ev.solution.scaled(0.5)
    kF = ev.dVF
    dkA = shaping.kappa_A.deriv(ev.A) * ev.grad_A  # gradient of kappa_A(A)
    kB = shaping.kappa_B(ev.B)
    bounds = velocity_bounds(q, cfg.limits)
    b_lo, b_hi = bounds.lower[4:], bounds.upper[4:]
    ll, lu = sol.lam_lower[4:], sol.lam_upper[4:]
    q_m = q[4:]
    res = {
        "stationarity x": abs(kF * dkA[0]),
        "stationarity y": abs(kF * dkA[1]),
        "stationarity yaw": abs(kF * dkA[3]),
        "stationarity joints": float(np.max(np.abs(kF * dkA[4:] - (ll - lu)))),
        "barrier dual equals force gain": abs(sol.lam - kF),
        "complementarity barrier": abs(kB * kF),
        "complementarity joint lower": float(np.max(np.abs(b_lo * ll))),
        "complementarity joint upper": float(np.max(np.abs(b_hi * lu))),
        "primal barrier": max(0.0, -kB),
        "primal joints": float(max(0.0, np.max(cfg.limits.q_m_lower - q_m), np.max(q_m - cfg.limits.q_m_upper))),
        "dual force gain": max(0.0, -kF),
        "dual joints": float(max(0.0, -np.min(ll), -np.min(lu))),
    }
    return SKKTReport(res, tol)


# --------------------------------------------------------------------------
# trajectory audit


@dataclass(frozen=True)
class AuditTolerances:
    B: float = 1e-9
    V_F: float = 1e-7
    A: float = 1e-7
    terminal_A: float = 1e-6
    converged_force: float = 0.1


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # PASS, FAIL, N/A or INFO
    detail: str = ""
    steps: tuple = ()


@dataclass(frozen=True)
class AuditReport:
    checks: tuple
    n_samples: int
    meta: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.status != "FAIL" for c in self.checks)

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def text(self):
        lines = [f"trajectory: {self.meta.get('name', '?')} ({self.n_samples} samples)"]
        for c in self.checks:
            line = f"{c.status:4s}  {c.name}"
            if c.detail:
                line += f": {c.detail}"
            if c.status == "FAIL" and c.steps:
                shown = ", ".join(str(s) for s in c.steps[:10])
                more = f" (+{len(c.steps) - 10} more)" if len(c.steps) > 10 else ""
                line += f" [steps {shown}{more}]"
            lines.append(line)
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines) + "\n"


def _steps(mask):
    return tuple(int(i) for i in np.flatnonzero(mask))


def terminal_alignment_bound(traj, shaping):
    """Final A against the largest alignment compatible with resting at Z_d."""
    return float(traj.A[-1]), float(shaping.max_alignment(traj.meta["Z_d"]))


def audit_trajectory(traj, shaping=None, tolerances=None):
    """Per-step checks of barrier non-negativity, joint containment and the
    decrease of the force potential and of A.

    Checks start once the trajectory is inside the safe set (B >= 0 with the
    joints strictly inside their limits).  Steps that carry an event, such as
    an injected disturbance, are excluded from the increment checks.
    ``shaping`` enables the terminal alignment bound and the diagram check.
    """
    tol = tolerances or AuditTolerances()
    meta = traj.meta
    N = len(traj)
    if N == 0 or traj.q.shape[0] != N:
        raise ContractError("malformed trajectory")
    lo = np.asarray(meta["q_m_lower"])
    hi = np.asarray(meta["q_m_upper"])
    q_m = traj.q[:, 4:]
    joints_in = np.all((q_m > lo) & (q_m < hi), axis=1)
    in_safe = (traj.B >= 0) & joints_in
    evented = np.array([bool(e) for e in traj.event])
    entry = int(np.argmax(in_safe)) if in_safe.any() else N
    after = np.arange(N) >= entry
    checks = []

    if entry == N:
        checks.append(CheckResult("safe set reached", "FAIL", "B never became non-negative"))
    else:
        checks.append(CheckResult("safe set reached", "PASS", f"t = {traj.t[entry]:.6f} s"))

    bad_B = after & (traj.B < -tol.B)
    checks.append(CheckResult(
        "barrier non-negative", "FAIL" if bad_B.any() else "PASS",
        f"min B after entry = {traj.B[after].min():.3e}" if after.any() else "no samples", _steps(bad_B)))

    bad_q = ~joints_in
    checks.append(CheckResult(
        "joints strictly inside limits", "FAIL" if bad_q.any() else "PASS",
        f"{int(bad_q.sum())} samples outside", _steps(bad_q)))

    infeasible = np.array([s != "feasible" for s in traj.status])
    bad_f = infeasible & after
    checks.append(CheckResult(
        "controller feasible in safe set", "FAIL" if bad_f.any() else "PASS",
        f"{int(infeasible.sum())} zero-hold steps in total", _steps(bad_f)))

    # increments between consecutive samples that both lie in the safe set
    pair = in_safe[:-1] & in_safe[1:] & ~evented[1:]
    moving = bool(meta.get("moving_reference", False))
    if moving:
        checks.append(CheckResult("force potential non-increasing", "N/A", "target moves over time"))
    else:
        dV = np.diff(traj.V_F)
        bad_V = np.zeros(N, dtype=bool)
        bad_V[1:] = pair & (dV > tol.V_F)
        worst = float(dV[pair].max()) if pair.any() else 0.0
        checks.append(CheckResult(
            "force potential non-increasing", "FAIL" if bad_V.any() else "PASS",
            f"max step increase {worst:.3e}", _steps(bad_V)))

    if not meta.get("z_rate_unbounded", False):
        checks.append(CheckResult("alignment non-increasing", "N/A", "normal-direction rate is bounded"))
    elif moving:
        checks.append(CheckResult("alignment non-increasing", "N/A", "target moves over time"))
    else:
        dA = np.diff(traj.A)
        bad_A = np.zeros(N, dtype=bool)
        bad_A[1:] = pair & (dA > tol.A)
        worst = float(dA[pair].max()) if pair.any() else 0.0
        checks.append(CheckResult(
            "alignment non-increasing", "FAIL" if bad_A.any() else "PASS",
            f"max step increase {worst:.3e}", _steps(bad_A)))

    if shaping is not None:
        # stored values are rounded to 1e-9, which the steep curve amplifies
        kA = np.array([shaping.kappa_A(a) for a in traj.A])
        slack = tol.B + 5e-10 * (1.0 + np.array([shaping.kappa_A.deriv(max(a, 1e-12)) for a in traj.A]))
        curve_gap = traj.Z - meta["Z_d_star"] - kA
        bad_d = after & (curve_gap < -slack)
        checks.append(CheckResult(
            "diagram points on the safe side", "FAIL" if bad_d.any() else "PASS",
            f"{int(bad_d.sum())} points below the curve", _steps(bad_d)))
        F_err = abs(traj.F[-1] - meta["F_d"])
        if F_err > tol.converged_force or moving:
            checks.append(CheckResult("terminal alignment bound", "N/A", f"not converged (|F - F_d| = {F_err:.3g} N)"
                                      if not moving else "target moves over time"))
        else:
            A_end, bound = terminal_alignment_bound(traj, shaping)
            ok = A_end <= bound + tol.terminal_A
            checks.append(CheckResult(
                "terminal alignment bound", "PASS" if ok else "FAIL", f"A = {A_end:.3e}, bound {bound:.3e}",
                () if ok else (N - 1,)))

    F_err = abs(traj.F[-1] - meta["F_d"])
    # informational: convergence is not a safety property
    checks.append(CheckResult("terminal force error", "INFO", f"|F - F_d| = {F_err:.4f} N"))
    return AuditReport(tuple(checks), N, dict(meta))
