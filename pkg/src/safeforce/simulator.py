"""Closed-loop kinematic simulation of ``q_dot = u(q)`` against a force model.

The plant is the ideal velocity-tracking vehicle assumed by the controller;
the only thing the controller sees of the environment is the scalar normal
force produced by the force model at the current tool position.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .controller import ControllerConfig, evaluate
from .environment import insertion_for_force
from .errors import ContractError
from .kinematics import RobotModel, _chain, as_configuration
from .shaping import ScalarShaping

# largest contact stiffness times step (N s/m) for which the fixed-step loop
# settles within a few hundredths of a newton of the target
STIFF_STEP_LIMIT = 30.0
RK4_STAGES = ((0.0, 1.0 / 6.0), (0.5, 1.0 / 3.0), (0.5, 1.0 / 3.0), (1.0, 1.0 / 6.0))
CSV_PRECISION = 9


@dataclass(frozen=True)
class Waypoints:
    """In-plane target (X_ref, Y_ref) over time.

    Between consecutive waypoints the target follows a cosine blend, so the
    rate is continuous and vanishes at every waypoint; outside the listed
    times the end values are held.
    """

    times: tuple
    X: tuple
    Y: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1 or len(self.X) != t.size or len(self.Y) != t.size:
            raise ContractError("waypoints need matching times, X and Y lists")
        if np.any(np.diff(t) <= 0):
            raise ContractError("waypoint times must be strictly increasing")

    def _segment(self, t):
        ts = self.times
        if len(ts) < 2 or t < ts[0] or t >= ts[-1]:
            return None
        k = int(np.searchsorted(ts, t, side="right")) - 1
        h = ts[k + 1] - ts[k]
        return k, (t - ts[k]) / h, h

    def at(self, t):
        seg = self._segment(t)
        if seg is None:
            i = 0 if t < self.times[0] else -1
            return float(self.X[i]), float(self.Y[i])
        k, s, _ = seg
        w = 0.5 * (1.0 - np.cos(np.pi * s))
        return (float(self.X[k] + w * (self.X[k + 1] - self.X[k])),
                float(self.Y[k] + w * (self.Y[k + 1] - self.Y[k])))

    def rate(self, t):
        seg = self._segment(t)
        if seg is None:
            return 0.0, 0.0
        k, s, h = seg
        dw = 0.5 * np.pi * np.sin(np.pi * s) / h
        return float(dw * (self.X[k + 1] - self.X[k])), float(dw * (self.Y[k + 1] - self.Y[k]))


@dataclass(frozen=True, eq=False)
class Disturbance:
    """Additive jump ``dq`` applied to the configuration at time ``t``."""

    t: float
    dq: np.ndarray


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    name: str
    model: RobotModel
    shaping: ScalarShaping
    controller: ControllerConfig
    force_model: object
    q0: np.ndarray
    dt: float = 1.0 / 60.0
    duration: float = 30.0
    reference: Waypoints = None
    disturbances: tuple = ()
    description: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "q0", as_configuration(self.q0, self.model))
        if not self.dt > 0:
            raise ContractError("dt must be positive")
        if not self.duration >= self.dt:
            raise ContractError("duration must be at least one step")
        if not self.shaping.Z_d_star < 0:
            raise ContractError("Z_d_star must be negative")
        if self.controller.E_diag.shape[0] != self.model.n:
            raise ContractError("controller dimensions do not match the robot model")

    @property
    def F_d(self):
        return self.shaping.F_d

    @property
    def Z_d_star(self):
        return self.shaping.Z_d_star

    @property
    def Z_d(self):
        """True insertion for the target force (simulation ground truth)."""
        return insertion_for_force(self.F_d, self.force_model)

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))


def contact_stiffness(force_model, F_d):
    """Slope dF/dZ of the force model at the target insertion (force grows
    in magnitude as the tool presses deeper)."""
    Z_d = insertion_for_force(F_d, force_model)
    h = 1e-6 * max(abs(Z_d), 1e-9)
    return max(0.0, (float(force_model(Z_d + h)) - float(force_model(Z_d - h))) / (2 * h))


def stable_dt(force_model, F_d, dt):
    """``dt`` reduced, if needed, to a whole fraction of a second with
    stiffness * dt <= STIFF_STEP_LIMIT."""
    k = contact_stiffness(force_model, F_d)
    if k <= 0 or k * dt <= STIFF_STEP_LIMIT:
        return dt
    return 1.0 / math.ceil(k / STIFF_STEP_LIMIT)


# --------------------------------------------------------------------------
# plant-side force sources


class PlantForce:
    """Force measured from the model at the current tool position."""

    def __init__(self, model):
        self.model = model
        self.record = []

    def __call__(self, t, Z):
        F = float(self.model(Z))
        self.record.append(F)
        return F


class RecordedForce:
    """Replays a previously recorded sequence of force readings, ignoring Z."""

    def __init__(self, values):
        self.values = list(values)
        self.i = 0

    def __call__(self, t, Z):
        F = self.values[self.i]
        self.i += 1
        return F


# --------------------------------------------------------------------------
# controller wrapper


class ClosedLoopController:
    """Evaluates the control law, reusing the last active set as a solver
    starting guess (the minimiser itself does not depend on it)."""

    def __init__(self, model, shaping, cfg, reference=None):
        self.model = model
        self.shaping = shaping
        self.cfg = cfg
        self.reference = reference
        self.warm = None

    def __call__(self, t, q, force_source):
        ks = _chain(q, self.model)
        F = force_source(t, ks.ee.Z)
        if self.reference is not None:
            ref, rate = self.reference.at(t), self.reference.rate(t)
        else:
            ref, rate = (0.0, 0.0), None
        ev = evaluate(q, F, self.model, self.shaping, self.cfg, ref, rate, self.warm, ks)
        if ev.solution.feasible:
            self.warm = ev.solution.active_set
        return ev, F, ref


def step(t, q, controller, force_source, dt):
    """One explicit RK4 step with the control re-evaluated at every stage.

    Returns ``(q_next, first_stage, feasible)``; ``first_stage`` is
    ``(evaluation, F, ref)`` at the start of the step.  If any stage is
    infeasible the whole step holds ``q`` (zero control).
    """
    if not dt > 0:
        raise ContractError("dt must be positive")
    acc = np.zeros_like(q)
    k_prev = None
    first = None
    for c, w in RK4_STAGES:
        qs = q if k_prev is None else q + (c * dt) * k_prev
        ev, F, ref = controller(t + c * dt, qs, force_source)
        if first is None:
            first = (ev, F, ref)
        if not ev.solution.feasible:
            return q.copy(), first, False
        k_prev = ev.solution.mu
        acc += w * k_prev
    return q + dt * acc, first, True


# --------------------------------------------------------------------------
# trajectory


def _quantize(a):
    """Round to the CSV precision exactly as a write/read cycle would."""
    fmt = f"%.{CSV_PRECISION}f"
    a = np.asarray(a, dtype=float)
    return np.array([float(fmt % v) for v in a.ravel()]).reshape(a.shape)


@dataclass(eq=False)
class Trajectory:
    """Uniformly sampled closed-loop log.

    ``V_F`` is the force potential (diagnostic quadrature of the true force
    model) and ``V_F_rate`` the controller-side proxy ``dVF/drZ * grad_rZ . u``.
    Float columns are stored at CSV precision.
    """

    t: np.ndarray
    q: np.ndarray
    u: np.ndarray
    F: np.ndarray
    Z: np.ndarray
    A: np.ndarray
    B: np.ndarray
    V_F: np.ndarray
    V_F_rate: np.ndarray
    X_ref: np.ndarray
    Y_ref: np.ndarray
    status: list
    event: list
    active: list
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.q.shape[1]

    def __len__(self):
        return self.t.shape[0]


def _force_integrand(shaping, force_model):
    def g(Z):
        return shaping.kappa_F(Z, force_model(Z) - shaping.F_d)

    return g


def _vf_increment(g, Z0, Z1, breaks):
    if Z0 == Z1:
        return 0.0
    lo, hi = (Z0, Z1) if Z0 < Z1 else (Z1, Z0)
    pts = [b for b in breaks if lo < b < hi] or None
    with warnings.catch_warnings():
        # the square-root shaping is singular at the target insertion
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(g, lo, hi, points=pts, epsabs=1e-14, epsrel=1e-12, limit=100)
    return val if Z1 > Z0 else -val


def _active_label(active):
    out = []
    for a in active:
        if a == "cbf":
            out.append("cbf")
        else:
            out.append(f"{a[0]}{'L' if a[1] == 'lower' else 'U'}")
    return "|".join(out)


def run_scenario(cfg, force_source=None, on_solve=None):
    """Integrate the closed loop for ``cfg.duration`` seconds.

    ``force_source`` defaults to the scenario's force model; ``on_solve`` is
    called with every first-stage evaluation (used for QP dumps).
    """
    model, shaping = cfg.model, cfg.shaping
    source = force_source if force_source is not None else PlantForce(cfg.force_model)
    ctrl = ClosedLoopController(model, shaping, cfg.controller, cfg.reference)
    Z_d = cfg.Z_d
    g = _force_integrand(shaping, cfg.force_model)
    breaks = (0.0, Z_d)
    N = cfg.n_steps
    n = model.n
    rows = {k: np.zeros(N + 1) for k in ("t", "F", "Z", "A", "B", "V_F", "V_F_rate", "X_ref", "Y_ref")}
    qs = np.zeros((N + 1, n))
    us = np.zeros((N + 1, n))
    status, event, active = [], [], []
    pending = sorted(cfg.disturbances, key=lambda d: d.t)
    q = cfg.q0.copy()
    V = None
    Z_prev = None
    for k in range(N + 1):
        t = k * cfg.dt
        ev_label = ""
        while pending and pending[0].t <= t + 1e-12:
            q = q + np.asarray(pending.pop(0).dq, dtype=float)
            ev_label = "disturbance"
        if k < N:
            q_next, first, ok = step(t, q, ctrl, source, cfg.dt)
        else:
            first = ctrl(t, q, source)
            ok = first[0].solution.feasible
        ev, F, ref = first
        if on_solve is not None:
            on_solve(t, ev)
        if V is None:
            V = _vf_increment(g, Z_d, ev.Z, breaks)
        else:
            V += _vf_increment(g, Z_prev, ev.Z, breaks)
        Z_prev = ev.Z
        u = ev.u if ok else np.zeros(n)
        if not ok and ev.solution.feasible:
            ev_label = (ev_label + ";" if ev_label else "") + "stage-infeasible"
        rows["t"][k] = t
        rows["F"][k] = F
        rows["Z"][k] = ev.Z
        rows["A"][k] = ev.A
        rows["B"][k] = ev.B
        rows["V_F"][k] = V
        rows["V_F_rate"][k] = ev.dVF * float(ev.grad_Z @ u)
        rows["X_ref"][k], rows["Y_ref"][k] = ref
        qs[k] = q
        us[k] = u
        status.append("feasible" if ok else "infeasible")
        event.append(ev_label)
        active.append(_active_label(ev.solution.active_set) if ev.solution.feasible else "")
        if k < N:
            q = q_next
    meta = trajectory_meta(cfg, Z_d)
    return Trajectory(
        _quantize(rows["t"]), _quantize(qs), _quantize(us), _quantize(rows["F"]), _quantize(rows["Z"]),
        _quantize(rows["A"]), _quantize(rows["B"]), _quantize(rows["V_F"]), _quantize(rows["V_F_rate"]),
        _quantize(rows["X_ref"]), _quantize(rows["Y_ref"]), status, event, active, meta,
    )


def trajectory_meta(cfg, Z_d):
    lim = cfg.controller.limits
    return {
        "name": cfg.name,
        "n": cfg.model.n,
        "dt": cfg.dt,
        "F_d": cfg.F_d,
        "Z_d": Z_d,
        "Z_d_star": cfg.Z_d_star,
        "z_rate_unbounded": bool(lim.z_unbounded),
        "moving_reference": cfg.reference is not None and len(cfg.reference.times) > 1,
        "q_m_lower": [float(v) for v in lim.q_m_lower],
        "q_m_upper": [float(v) for v in lim.q_m_upper],
        "force_model": cfg.force_model.describe(),
    }


# --------------------------------------------------------------------------
# CSV


def csv_columns(n):
    qn = ["x", "y", "z", "psi"] + [f"qm{j}" for j in range(1, n - 3)]
    return (
        ["t"] + [f"q_{c}" for c in qn] + [f"u_{c}" for c in qn]
        + ["F", "Z", "A", "B", "V_F", "V_F_rate", "X_ref", "Y_ref", "status", "event", "active_set"]
    )


def emit_csv(traj):
    """CSV text: one ``# meta`` JSON comment line, a header, then one row per sample."""
    fmt = f"%.{CSV_PRECISION}f"
    buf = io.StringIO()
    buf.write("# meta " + json.dumps(traj.meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_columns(traj.n))
    for k in range(len(traj)):
        nums = [traj.t[k], *traj.q[k], *traj.u[k], traj.F[k], traj.Z[k], traj.A[k], traj.B[k],
                traj.V_F[k], traj.V_F_rate[k], traj.X_ref[k], traj.Y_ref[k]]
        w.writerow([fmt % v for v in nums] + [traj.status[k], traj.event[k], traj.active[k]])
    return buf.getvalue()


class TrajectoryParseError(ValueError):
    pass


def parse_csv(text):
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# meta "):
        raise TrajectoryParseError("line 1: missing '# meta' header")
    try:
        meta = json.loads(lines[0][len("# meta "):])
    except json.JSONDecodeError as exc:
        raise TrajectoryParseError(f"line 1: bad meta JSON ({exc})") from None
    reader = csv.reader(lines[1:])
    try:
        header = next(reader)
    except StopIteration:
        raise TrajectoryParseError("line 2: missing column header") from None
    n = int(meta.get("n", 0))
    if header != csv_columns(n):
        raise TrajectoryParseError("line 2: column header does not match the documented layout")
    nnum = 1 + 2 * n + 8
    nums, status, event, active = [], [], [], []
    for i, row in enumerate(reader, start=3):
        if len(row) != len(header):
            raise TrajectoryParseError(f"line {i}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(v) for v in row[:nnum]]
        except ValueError as exc:
            raise TrajectoryParseError(f"line {i}: {exc}") from None
        if not np.all(np.isfinite(vals)):
            raise TrajectoryParseError(f"line {i}: non-finite value")
        nums.append(vals)
        status.append(row[nnum])
        event.append(row[nnum + 1])
        active.append(row[nnum + 2])
    if not nums:
        raise TrajectoryParseError("trajectory has no samples")
    M = np.array(nums)
    t = M[:, 0]
    if t.size > 1 and not np.allclose(np.diff(t), meta.get("dt", t[1] - t[0]), atol=2e-9):
        raise TrajectoryParseError("time column is not a uniform grid")
    c = 1 + 2 * n
    return Trajectory(
        t, M[:, 1:1 + n], M[:, 1 + n:c], M[:, c], M[:, c + 1], M[:, c + 2], M[:, c + 3], M[:, c + 4],
        M[:, c + 5], M[:, c + 6], M[:, c + 7], status, event, active, meta,
    )
