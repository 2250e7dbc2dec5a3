"""Scenario files (YAML) and the named experiment presets.

Angles are written in degrees in scenario files and converted to radians
here, once.  Every validation error names the offending field path and,
when the scenario came from text, its line.
"""

from __future__ import annotations

import copy
import math

import numpy as np
import yaml

from .controller import ControllerConfig, PAPER_EPS
from .environment import ForceRangeError, ForceTable, SaturatingSpring, Spring, insertion_for_force
from .errors import ConfigError, ContractError
from .kinematics import RobotModel, make_configuration, planar_arm, rot_y
from .limits import LimitConfig
from .shaping import BarrierRate, ForceGain, Linear, Quadratic2D, SaturatingRational, check_shaping, preset
from .simulator import Disturbance, ScenarioConfig, Waypoints

# plane axes (columns) in the world for a wall facing +x_world: x_P horizontal
# along the wall, y_P up, z_P the outward normal
VERTICAL_WALL = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def plane_rotation(orientation="vertical", incline_deg=30.0, rpy_deg=None):
    """World orientation of the plane frame.

    ``inclined`` tilts the wall about its horizontal axis so that the outward
    normal rises ``incline_deg`` above the horizon.
    """
    if orientation == "vertical":
        return VERTICAL_WALL.copy()
    if orientation == "inclined":
        return rot_y(-math.radians(incline_deg)) @ VERTICAL_WALL
    if orientation == "custom":
        from .kinematics import rpy_matrix

        r, p, y = np.radians(rpy_deg)
        return rpy_matrix(r, p, y)
    raise ValueError(f"unknown plane orientation {orientation!r}")


# --------------------------------------------------------------------------
# field-path aware reader


def _line_map(text):
    """Map field paths (tuples) to 1-based line numbers of a YAML document."""
    out = {}
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return out

    def walk(node, path):
        out[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = k.value
                out[path + (key,)] = k.start_mark.line + 1
                walk(v, path + (key,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    if root is not None:
        walk(root, ())
    return out


def _fmt_path(path):
    s = ""
    for p in path:
        s += f"[{p}]" if isinstance(p, int) else (f".{p}" if s else str(p))
    return s


class _Ctx:
    def __init__(self, lines):
        self.lines = lines

    def fail(self, path, message):
        line = None
        for cut in range(len(path), -1, -1):
            if tuple(path[:cut]) in self.lines:
                line = self.lines[tuple(path[:cut])]
                break
        raise ConfigError(_fmt_path(path), message, line)

    def section(self, data, path, key, required=False):
        val = data.get(key) if isinstance(data, dict) else None
        if val is None:
            if required:
                self.fail(path + (key,), "missing required section")
            return {}
        if not isinstance(val, dict):
            self.fail(path + (key,), "expected a mapping")
        return val

    def number(self, data, path, key, default=None, required=False, allow_inf=False):
        if key not in data or data[key] is None:
            if required or default is None and required:
                self.fail(path + (key,), "missing required number")
            return default
        return self.to_number(data[key], path + (key,), allow_inf)

    def to_number(self, v, path, allow_inf=False):
        if isinstance(v, str) and allow_inf and v.strip().lower() in ("inf", "+inf", ".inf", "unbounded"):
            return math.inf
        if isinstance(v, str):
            # YAML 1.1 reads exponents without a sign (1.0e5) as strings
            try:
                v = float(v)
            except ValueError:
                self.fail(path, f"expected a number, got {v!r}")
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(path, f"expected a number, got {v!r}")
        v = float(v)
        if math.isnan(v) or (math.isinf(v) and not allow_inf):
            self.fail(path, "value must be finite")
        return v

    def vector(self, data, path, key, length=None, default=None, required=False, allow_inf=False):
        if key not in data or data[key] is None:
            if required:
                self.fail(path + (key,), "missing required list")
            return None if default is None else np.asarray(default, dtype=float)
        v = data[key]
        if not isinstance(v, (list, tuple)):
            self.fail(path + (key,), "expected a list of numbers")
        if length is not None and len(v) != length:
            self.fail(path + (key,), f"expected {length} entries, got {len(v)}")
        return np.array([self.to_number(x, path + (key, i), allow_inf) for i, x in enumerate(v)])

    def unknown(self, data, path, allowed):
        for k in data:
            if k not in allowed:
                self.fail(path + (k,), f"unknown field (allowed: {', '.join(sorted(allowed))})")


# --------------------------------------------------------------------------
# schema


def _parse_shaping(ctx, sec):
    path = ("shaping",)
    ctx.unknown(sec, path, {"preset", "kappa_F", "kappa_A", "kappa_A_O", "V_A_XY", "kappa_B"})
    name = sec.get("preset", "paper-exp")
    try:
        sh = preset(name)
    except KeyError as exc:
        ctx.fail(path + ("preset",), str(exc.args[0]))
    kw = {}

    def sub(key, cls, fields):
        d = sec.get(key)
        if d is None:
            return
        if not isinstance(d, dict):
            ctx.fail(path + (key,), "expected a mapping of coefficients")
        ctx.unknown(d, path + (key,), set(fields))
        base = getattr(sh, key)
        vals = {f: ctx.number(d, path + (key,), f, default=getattr(base, f)) for f in fields}
        try:
            kw[key] = cls(**vals)
        except (ValueError, ContractError) as exc:
            ctx.fail(path + (key,), str(exc))

    sub("kappa_F", ForceGain, ("a", "b", "h"))
    sub("kappa_A", SaturatingRational, ("gain", "offset", "power"))
    sub("kappa_A_O", Linear, ("gain",))
    sub("V_A_XY", Quadratic2D, ("wx", "wy"))
    sub("kappa_B", BarrierRate, ("gain", "recovery", "h"))
    from dataclasses import replace

    return replace(sh, **kw)


def _parse_limits(ctx, sec, n_arm):
    path = ("limits",)
    ctx.unknown(sec, path, {"preset", "u_D", "u_D_lower", "u_D_upper", "u_m_deg", "q_m_deg",
                            "q_m_lower_deg", "q_m_upper_deg", "K_L"})
    base = {"paper-exp": [0.1, 0.15, math.inf, 5.7], "paper-exp-bounded-z": [0.1, 0.15, 0.3, 5.7]}
    name = sec.get("preset", "paper-exp")
    if name not in base:
        ctx.fail(path + ("preset",), f"unknown limit preset {name!r}; choose from {sorted(base)}")
    u_D = ctx.vector(sec, path, "u_D", 4, default=base[name], allow_inf=True)
    u_lo = ctx.vector(sec, path, "u_D_lower", 4, allow_inf=True)
    u_hi = ctx.vector(sec, path, "u_D_upper", 4, allow_inf=True)
    u_lo = -u_D if u_lo is None else u_lo
    u_hi = u_D if u_hi is None else u_hi
    # yaw entries are given in deg/s
    u_lo = u_lo.copy()
    u_hi = u_hi.copy()
    u_lo[3] = math.radians(u_lo[3])
    u_hi[3] = math.radians(u_hi[3])
    um = ctx.vector(sec, path, "u_m_deg", n_arm, default=[20.0] * n_arm)
    qm = ctx.vector(sec, path, "q_m_deg", n_arm, default=([70.0, 105.0] if n_arm == 2 else [90.0] * n_arm))
    qlo = ctx.vector(sec, path, "q_m_lower_deg", n_arm)
    qhi = ctx.vector(sec, path, "q_m_upper_deg", n_arm)
    qlo = -qm if qlo is None else qlo
    qhi = qm if qhi is None else qhi
    K_L = ctx.number(sec, path, "K_L", default=0.5)
    try:
        return LimitConfig(u_lo, u_hi, -np.radians(um), np.radians(um), np.radians(qlo), np.radians(qhi), K_L)
    except ContractError as exc:
        ctx.fail(path, str(exc))


def _parse_force_model(ctx, sec):
    path = ("force_model",)
    variant = sec.get("variant", "spring")
    try:
        if variant == "spring":
            ctx.unknown(sec, path, {"variant", "k"})
            return Spring(ctx.number(sec, path, "k", required=True))
        if variant == "saturating-spring":
            ctx.unknown(sec, path, {"variant", "k", "F_sat"})
            return SaturatingSpring(ctx.number(sec, path, "k", required=True), ctx.number(sec, path, "F_sat", required=True))
        if variant == "table":
            ctx.unknown(sec, path, {"variant", "Z", "F"})
            return ForceTable(tuple(ctx.vector(sec, path, "Z", required=True)), tuple(ctx.vector(sec, path, "F", required=True)))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        ctx.fail(path, str(exc))
    ctx.fail(path + ("variant",), f"unknown force model {variant!r} (spring, saturating-spring, table)")


def _parse_model(ctx, data):
    plane = ctx.section(data, (), "plane")
    ctx.unknown(plane, ("plane",), {"orientation", "incline_deg", "rpy_deg", "origin"})
    orient = plane.get("orientation", "vertical")
    if orient not in ("vertical", "inclined", "custom"):
        ctx.fail(("plane", "orientation"), f"unknown orientation {orient!r} (vertical, inclined, custom)")
    incl = ctx.number(plane, ("plane",), "incline_deg", default=30.0)
    rpy = ctx.vector(plane, ("plane",), "rpy_deg", 3, required=orient == "custom")
    origin = ctx.vector(plane, ("plane",), "origin", 3, default=[0.0, 0.0, 0.0])
    veh = ctx.section(data, (), "vehicle")
    ctx.unknown(veh, ("vehicle",), {"roll_deg", "pitch_deg"})
    roll = math.radians(ctx.number(veh, ("vehicle",), "roll_deg", default=0.0))
    pitch = math.radians(ctx.number(veh, ("vehicle",), "pitch_deg", default=0.0))
    arm = ctx.section(data, (), "arm")
    ctx.unknown(arm, ("arm",), {"link_lengths", "mount_offset"})
    links = ctx.vector(arm, ("arm",), "link_lengths", default=[0.15, 0.15])
    if links.size < 1:
        ctx.fail(("arm", "link_lengths"), "the arm needs at least one link")
    mount = ctx.number(arm, ("arm",), "mount_offset", default=0.10)
    joints, mount_T, tool = planar_arm(tuple(links), mount)
    try:
        return RobotModel.from_world_plane(
            joints, plane_rotation(orient, incl, rpy), origin, mount=mount_T, tool=tool, roll=roll, pitch=pitch
        )
    except ContractError as exc:
        ctx.fail(("plane",), str(exc))


def scenario_from_dict(data, lines=None, name=None):
    """Build a validated :class:`ScenarioConfig` from the documented schema."""
    ctx = _Ctx(lines or {})
    if not isinstance(data, dict):
        ctx.fail((), "scenario must be a mapping")
    ctx.unknown(data, (), {"name", "dt", "duration", "plane", "vehicle", "arm", "shaping", "limits",
                           "regularisation", "force_model", "target", "initial", "reference", "disturbances"})
    model = _parse_model(ctx, data)
    m = model.n_joints
    shaping = _parse_shaping(ctx, ctx.section(data, (), "shaping"))
    limits = _parse_limits(ctx, ctx.section(data, (), "limits"), m)
    eps = ctx.vector(data, (), "regularisation", model.n,
                     default=list(PAPER_EPS) if m == 2 else [0.04, 0.04, 0.0, 4e-5] + [3e-6] * m)
    try:
        ccfg = ControllerConfig(limits, eps)
    except ContractError as exc:
        ctx.fail(("regularisation",), str(exc))
    force = _parse_force_model(ctx, ctx.section(data, (), "force_model", required=True))

    tgt = ctx.section(data, (), "target", required=True)
    ctx.unknown(tgt, ("target",), {"F_d", "Z_d_star", "Z_d_star_margin"})
    F_d = ctx.number(tgt, ("target",), "F_d", required=True)
    if not F_d < 0:
        ctx.fail(("target", "F_d"), "desired force must be negative")
    try:
        Z_d = insertion_for_force(F_d, force)
    except (ForceRangeError, ValueError) as exc:
        ctx.fail(("target", "F_d"), str(exc))
    if "Z_d_star" in tgt and "Z_d_star_margin" in tgt:
        ctx.fail(("target",), "give either Z_d_star or Z_d_star_margin, not both")
    if "Z_d_star" in tgt:
        Z_star = ctx.number(tgt, ("target",), "Z_d_star")
    else:
        margin = ctx.number(tgt, ("target",), "Z_d_star_margin", default=0.005)
        if margin < 0:
            ctx.fail(("target", "Z_d_star_margin"), "margin must be non-negative")
        Z_star = Z_d - margin
    if not Z_star < 0:
        ctx.fail(("target", "Z_d_star"), "Z_d_star must be negative")
    shaping = shaping.with_targets(F_d=F_d, Z_d_star=Z_star)
    problems = check_shaping(shaping)
    if problems:
        ctx.fail(("shaping",), "; ".join(problems))

    ini = ctx.section(data, (), "initial", required=True)
    ctx.unknown(ini, ("initial",), {"x", "y", "z", "yaw_deg", "joints_deg"})
    q0 = make_configuration(
        ctx.number(ini, ("initial",), "x", required=True),
        ctx.number(ini, ("initial",), "y", required=True),
        ctx.number(ini, ("initial",), "z", required=True),
        math.radians(ctx.number(ini, ("initial",), "yaw_deg", required=True)),
        np.radians(ctx.vector(ini, ("initial",), "joints_deg", m, required=True)),
    )

    ref = None
    rsec = ctx.section(data, (), "reference")
    if rsec:
        ctx.unknown(rsec, ("reference",), {"waypoints"})
        wps = rsec.get("waypoints")
        if not isinstance(wps, list) or not wps:
            ctx.fail(("reference", "waypoints"), "expected a non-empty list of [t, X, Y]")
        rows = []
        for i, w in enumerate(wps):
            if not isinstance(w, list) or len(w) != 3:
                ctx.fail(("reference", "waypoints", i), "expected [t, X, Y]")
            rows.append([ctx.to_number(v, ("reference", "waypoints", i, j)) for j, v in enumerate(w)])
        rows = np.array(rows)
        try:
            ref = Waypoints(tuple(rows[:, 0]), tuple(rows[:, 1]), tuple(rows[:, 2]))
        except ContractError as exc:
            ctx.fail(("reference", "waypoints"), str(exc))

    dist = []
    dl = data.get("disturbances") or []
    if not isinstance(dl, list):
        ctx.fail(("disturbances",), "expected a list")
    for i, d in enumerate(dl):
        p = ("disturbances", i)
        if not isinstance(d, dict):
            ctx.fail(p, "expected a mapping with t and dq")
        ctx.unknown(d, p, {"t", "dq"})
        t = ctx.number(d, p, "t", required=True)
        dq = ctx.vector(d, p, "dq", model.n, required=True)
        dq = dq.copy()
        dq[3:] = np.radians(dq[3:])  # yaw and joints in degrees
        dist.append(Disturbance(t, dq))

    dt = ctx.number(data, (), "dt", default=1.0 / 60.0)
    if not dt > 0:
        ctx.fail(("dt",), "dt must be positive")
    duration = ctx.number(data, (), "duration", default=30.0)
    if not duration >= dt:
        ctx.fail(("duration",), "duration must be at least dt")
    try:
        return ScenarioConfig(
            name=str(data.get("name", name or "scenario")), model=model, shaping=shaping, controller=ccfg,
            force_model=force, q0=q0, dt=dt, duration=duration, reference=ref, disturbances=tuple(dist),
            description=copy.deepcopy(data),
        )
    except ContractError as exc:
        ctx.fail((), str(exc))


def load_scenario(text, name=None):
    """Parse YAML scenario text."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("<document>", f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from None
    return scenario_from_dict(data, _line_map(text), name)


def load_scenario_file(path):
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read(), name=str(path))


# --------------------------------------------------------------------------
# presets (analogs of the six experiments; initial states are illustrative)

_BASE = {
    "dt": 1.0 / 60.0,
    "duration": 30.0,
    "plane": {"orientation": "vertical"},
    "arm": {"link_lengths": [0.15, 0.15], "mount_offset": 0.10},
    "shaping": {"preset": "paper-exp"},
    "limits": {"preset": "paper-exp"},
    "force_model": {"variant": "spring", "k": 300.0},
    "target": {"F_d": -3.0, "Z_d_star_margin": 0.005},
    # raised from the listed (0.04, 0.04, 0, 4e-5, 3e-6, 3e-6) so that the
    # 60 Hz fixed-step loop stays out of rate-limit chatter (see README)
    "regularisation": [0.1, 0.1, 0.0, 0.05, 0.05, 0.05],
}


def _with(**kw):
    d = copy.deepcopy(_BASE)
    for k, v in kw.items():
        d[k] = v
    return d


PRESET_SCENARIOS = {
    # starts safely above the barrier curve, misaligned by roughly 45 degrees
    "exp1": _with(name="exp1", initial={"x": 0.3, "y": -0.2, "z": 2.0, "yaw_deg": 205.0, "joints_deg": [-20.0, -30.0]}),
    # same start with the normal rate limited (alignment monotonicity is then not guaranteed)
    "exp1-bz": _with(name="exp1-bz", limits={"preset": "paper-exp-bounded-z"},
                     initial={"x": 0.3, "y": -0.2, "z": 2.0, "yaw_deg": 205.0, "joints_deg": [-20.0, -30.0]}),
    # starts below the barrier curve: close to the wall and misaligned
    "exp2": _with(name="exp2", shaping={"preset": "paper-exp", "kappa_B": {"gain": 0.3, "recovery": 0.3, "h": 0.5}},
                  initial={"x": 0.3, "y": -0.2, "z": 0.35, "yaw_deg": 205.0, "joints_deg": [-20.0, -30.0]}),
    # surface normal raised 30 degrees above the horizon
    "exp3": _with(name="exp3", plane={"orientation": "inclined", "incline_deg": 30.0},
                  initial={"x": 0.2, "y": -0.1, "z": 2.0, "yaw_deg": 200.0, "joints_deg": [-10.0, -20.0]}),
    # one point of the force sweep; the sweep varies target.F_d over -1..-5 N
    "exp4": _with(name="exp4", target={"F_d": -1.0, "Z_d_star_margin": 0.005},
                  initial={"x": 0.3, "y": -0.2, "z": 2.0, "yaw_deg": 205.0, "joints_deg": [-20.0, -30.0]}),
    # hard contact: very stiff spring, short horizon, fine step
    "exp5": _with(name="exp5", dt=1.0 / 3000.0, duration=0.4, force_model={"variant": "spring", "k": 1.0e5},
                  initial={"x": 0.002, "y": 0.21, "z": 0.257, "yaw_deg": 180.3, "joints_deg": [-45.0, -45.0]}),
    # force exertion while the in-plane target moves
    "exp6": _with(name="exp6", duration=40.0,
                  reference={"waypoints": [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [20.0, 0.3, 0.0], [30.0, 0.3, 0.2], [40.0, 0.3, 0.2]]},
                  initial={"x": 0.0, "y": 0.206, "z": 0.31, "yaw_deg": 180.0, "joints_deg": [-45.0, -45.0]}),
}

# descriptive aliases
PRESET_SCENARIOS["exp1-above"] = PRESET_SCENARIOS["exp1"]
PRESET_SCENARIOS["exp2-below"] = PRESET_SCENARIOS["exp2"]

# named parameter sweeps: base preset plus a grid over dotted field paths
PRESET_SWEEPS = {
    "exp4-sweep": ("exp4", {"target.F_d": [-1.0, -2.0, -3.0, -4.0, -5.0]}),
    "exp3-sweep": ("exp3", {"target.F_d": [-1.0, -2.0, -3.0, -4.0, -5.0]}),
}


def preset_names():
    return sorted(PRESET_SCENARIOS)


def preset_dict(name):
    try:
        return copy.deepcopy(PRESET_SCENARIOS[name])
    except KeyError:
        raise ConfigError("--preset", f"unknown preset {name!r}; choose from {', '.join(preset_names())}") from None


def preset_scenario(name, **overrides):
    """Scenario for a named preset; ``overrides`` replace top-level sections."""
    d = preset_dict(name)
    d.update(overrides)
    return scenario_from_dict(d, name=name)


def set_path(d, dotted, value):
    """Set ``a.b.c`` in a nested dict, creating sections as needed."""
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
    cur[keys[-1]] = value
    return d
