"""Command-line front end: run a scenario or sweep parameters over one.

Exit codes: 0 all audits pass, 1 an audit failed (or a sweep point did),
2 the configuration could not be parsed or validated.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import yaml

from .analysis import audit_trajectory
from .errors import ConfigError, ContractError
from .qp import dump_record
from .scenarios import PRESET_SWEEPS, _line_map, preset_dict, preset_names, scenario_from_dict, set_path
from .simulator import emit_csv, run_scenario, stable_dt
from .svg import barrier_svg

EXIT_OK, EXIT_AUDIT, EXIT_CONFIG = 0, 1, 2


def _read_base(args):
    """Scenario dict plus its line map, from --preset or --scenario."""
    if bool(args.preset) == bool(args.scenario):
        raise ConfigError("--preset/--scenario", "give exactly one of --preset or --scenario")
    if args.preset:
        return preset_dict(args.preset), {}
    try:
        with open(args.scenario, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("--scenario", f"cannot read {args.scenario}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("<document>", f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from None
    if not isinstance(data, dict):
        raise ConfigError("<document>", "scenario must be a mapping")
    data.setdefault("name", os.path.splitext(os.path.basename(args.scenario))[0])
    return data, _line_map(text)


def _parse_assignment(text, flag):
    if "=" not in text:
        raise ConfigError(flag, f"expected path=value, got {text!r}")
    path, value = text.split("=", 1)
    try:
        return path.strip(), yaml.safe_load(value)
    except yaml.YAMLError:
        raise ConfigError(flag, f"cannot parse value in {text!r}") from None


def _apply_overrides(data, args):
    for item in args.set or ():
        path, value = _parse_assignment(item, "--set")
        set_path(data, path, value)
    if args.dt is not None:
        data["dt"] = args.dt
    return data


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def execute(data, lines, out_dir, emit_svg=False, emit_qp_dumps=False, auto_dt=False, manifest=None):
    """Run one scenario dict and write its artifacts into ``out_dir``.

    Returns ``(config, trajectory, audit)``.
    """
    cfg = scenario_from_dict(data, lines)
    if auto_dt:
        dt = stable_dt(cfg.force_model, cfg.F_d, cfg.dt)
        if dt != cfg.dt:
            data = dict(data, dt=dt)
            cfg = scenario_from_dict(data, lines)
    os.makedirs(out_dir, exist_ok=True)
    dumps = []
    on_solve = None
    if emit_qp_dumps:
        def on_solve(t, ev):
            dumps.append(dump_record(ev.problem, ev.solution, t=round(t, 12)))
    traj = run_scenario(cfg, on_solve=on_solve)
    report = audit_trajectory(traj, cfg.shaping)
    _write(os.path.join(out_dir, "trajectory.csv"), emit_csv(traj))
    _write(os.path.join(out_dir, "audit.txt"), report.text())
    if emit_svg:
        _write(os.path.join(out_dir, "barrier.svg"), barrier_svg(traj, cfg.shaping, title=cfg.name))
    if emit_qp_dumps:
        _write(os.path.join(out_dir, "qp_dumps.jsonl"), "\n".join(dumps) + "\n")
    if manifest is not None:
        _write(os.path.join(out_dir, "manifest.json"), json.dumps(dict(manifest, dt=cfg.dt), indent=2, sort_keys=True) + "\n")
    return cfg, traj, report


def cmd_run(args):
    data, lines = _read_base(args)
    data = _apply_overrides(data, args)
    out = args.out or os.path.join("safeforce-out", str(data.get("name", "scenario")))
    manifest = {"source": args.preset or args.scenario, "seed": args.seed, "overrides": args.set or [],
                "emit_svg": args.emit_svg, "emit_qp_dumps": args.emit_qp_dumps}
    cfg, traj, report = execute(data, lines, out, args.emit_svg, args.emit_qp_dumps, manifest=manifest)
    sys.stdout.write(report.text())
    print(f"artifacts written to {out}")
    return EXIT_OK if report.passed else EXIT_AUDIT


def _grid(args):
    """Base dict, line map and list of {path: value} points."""
    axes = {}
    if args.preset in PRESET_SWEEPS:
        base_name, axes = PRESET_SWEEPS[args.preset]
        data, lines = preset_dict(base_name), {}
        axes = dict(axes)
    else:
        data, lines = _read_base(args)
    for item in args.grid or ():
        path, values = _parse_assignment(item, "--grid")
        if values is None:
            values = []
        if isinstance(values, str) and "," in values:
            values = [yaml.safe_load(v) for v in values.split(",") if v.strip()]
        if not isinstance(values, list):
            values = [values]
        axes[path] = values
    if not axes or any(len(v) == 0 for v in axes.values()):
        raise ConfigError("--grid", "the parameter grid is empty")
    paths = list(axes)
    points = [dict(zip(paths, combo)) for combo in itertools.product(*(axes[p] for p in paths))]
    return _apply_overrides(data, args), lines, paths, points


def _sweep_point(job):
    i, data, lines, point, out_dir, emit_svg = job
    row = {"point": i, **point, "dt": "", "terminal_force_error": "", "terminal_A": "", "min_B": "",
           "audit_pass": False, "error": ""}
    try:
        d = json.loads(json.dumps(data))
        for path, value in point.items():
            set_path(d, path, value)
        cfg, traj, report = execute(d, lines, out_dir, emit_svg=emit_svg, auto_dt=True,
                                    manifest={"point": point})
        row.update(dt=f"{cfg.dt:.9g}", terminal_force_error=f"{abs(traj.F[-1] - cfg.F_d):.6f}",
                   terminal_A=f"{traj.A[-1]:.9f}", min_B=f"{traj.B.min():.9f}", audit_pass=report.passed)
    except (ConfigError, ContractError, ValueError) as exc:
        row["error"] = str(exc)
    return row


def cmd_sweep(args):
    data, lines, paths, points = _grid(args)
    out = args.out or os.path.join("safeforce-out", str(data.get("name", "sweep")) + "-sweep")
    os.makedirs(out, exist_ok=True)
    jobs = [(i, data, lines, p, os.path.join(out, f"point-{i:03d}"), args.emit_svg) for i, p in enumerate(points)]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    cols = ["point", *paths, "dt", "terminal_force_error", "terminal_A", "min_B", "audit_pass", "error"]
    with open(os.path.join(out, "summary.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
    for r in rows:
        label = ", ".join(f"{p}={r[p]}" for p in paths)
        status = "PASS" if r["audit_pass"] else ("ERROR " + r["error"] if r["error"] else "FAIL")
        print(f"point {r['point']:3d} [{label}] force error {r['terminal_force_error'] or '-'}: {status}")
    print(f"summary written to {os.path.join(out, 'summary.csv')}")
    return EXIT_OK if all(r["audit_pass"] for r in rows) else EXIT_AUDIT


def build_parser():
    p = argparse.ArgumentParser(prog="safeforce", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--preset", help=f"named preset ({', '.join(preset_names())})")
        sp.add_argument("--scenario", help="path to a YAML scenario file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--dt", type=float, help="override the integration step (s)")
        sp.add_argument("--set", action="append", metavar="PATH=VALUE",
                        help="override one scenario field, e.g. target.F_d=-2 (repeatable)")
        sp.add_argument("--emit-svg", action="store_true", help="write barrier.svg")
        sp.add_argument("--seed", type=int, default=0, help="recorded in the run manifest")

    r = sub.add_parser("run", help="simulate one scenario and audit it")
    common(r)
    r.add_argument("--emit-qp-dumps", action="store_true", help="write one JSON record per control solve")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a scenario over a parameter grid")
    common(s)
    s.add_argument("--grid", action="append", metavar="PATH=[V1,V2,...]",
                   help="grid axis over a scenario field (repeatable; axes combine as a product)")
    s.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
