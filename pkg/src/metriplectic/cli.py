"""Command-line interface.

Exit codes: 0 success, 1 audit failure, 2 solver failure, 3 configuration
or parse error.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import kernels
from .dgrad import DiscreteGradientScheme
from .errors import ConfigurationError, IntegrationAborted, StepFailure
from .harness import audit_system, audit_trajectory, cross_validate_formulations, entropy_rate_check
from .integrate import convergence_study, integrate, rk4_integrate
from .liealg import StructureConstants
from .scenario import ScenarioError, load_scenario, tomllib
from .trajio import dump_json, read_trajectory, write_trajectory

EXIT_OK = 0
EXIT_AUDIT = 1
EXIT_SOLVER = 2
EXIT_CONFIG = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _emit(doc, out=None):
    text = dump_json(_clean(doc))
    print(text)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")


def _trajectory(scen, method, n_steps=None):
    n = scen.n_steps if n_steps is None else n_steps
    if method == "rk4":
        return rk4_integrate(scen.system, scen.step_h, scen.initial_state, n, scenario_id=scen.name)
    return integrate(scen.system, scen.config(), scen.initial_state, n, scenario_id=scen.name)


def cmd_run(args):
    scen = load_scenario(args.scenario)
    try:
        traj = _trajectory(scen, args.method, args.n_steps)
    except IntegrationAborted as exc:
        write_trajectory(exc.trajectory, args.out, error=str(exc))
        print(f"solver failure: {exc}; wrote {len(exc.trajectory)} records (truncated)", file=sys.stderr)
        return EXIT_SOLVER
    write_trajectory(traj, args.out)
    e = traj.energies
    print(dump_json({
        "scenario": scen.name,
        "method": traj.method,
        "records": len(traj),
        "out": str(args.out),
        "energy_drift": float(np.max(np.abs(e - e[0])) / (1 + abs(e[0]))),
        "final_entropy": float(traj.entropies[-1]),
        "backend": kernels.BACKEND,
    }))
    return EXIT_OK


def full_audit(scen, traj):
    report = audit_system(scen.system, scen.dim, seed=scen.seed)
    report.extend(audit_trajectory(traj, scen.system))
    report.extend(entropy_rate_check(traj, scen.system, kd_variant=scen.kd_variant))
    if scen.system_kind == "rigid-body":
        report.extend(cross_validate_formulations(StructureConstants.so3(), scen.inertia, np.eye(3),
                                                  n_samples=100, seed=scen.seed))
    return report


def cmd_check(args):
    scen = load_scenario(args.scenario)
    if args.traj:
        traj = read_trajectory(args.traj)
    else:
        try:
            traj = _trajectory(scen, "metriplectic")
        except IntegrationAborted as exc:
            print(f"solver failure: {exc}", file=sys.stderr)
            return EXIT_SOLVER
    report = full_audit(scen, traj)
    doc = {"scenario": scen.name, "method": traj.method, "records": len(traj), "truncated": traj.truncated}
    doc.update(report.to_dict())
    _emit(doc, args.report)
    return EXIT_OK if report.passed else EXIT_AUDIT


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_converge(args):
    scen = load_scenario(args.scenario)
    hs = _floats(args.h_list)
    try:
        rep = convergence_study(scen.system, scen.config(), scen.initial_state, args.t_final, hs, method=args.method)
    except IntegrationAborted as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    _emit({
        "scenario": scen.name,
        "method": rep.method,
        "t_final": args.t_final,
        "h_list": list(rep.h_list),
        "errors": list(rep.errors),
        "h_ref": rep.h_ref,
        "order": rep.order,
        "inconclusive": rep.inconclusive,
    }, args.report)
    return EXIT_OK


def _load_grid(path):
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"grid file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: parse error: {exc}") from None
    grid = {}
    for key in ("step_h", "scheme", "kd_variant"):
        val = doc.get(key)
        if val is None:
            continue
        if not isinstance(val, list) or not val:
            raise ScenarioError(f"{path}: field '{key}' must be a non-empty array")
        grid[key] = val
    if not grid:
        raise ScenarioError(f"{path}: grid needs at least one of step_h, scheme, kd_variant")
    return grid


def _sweep_cell(scen, index, cell, t_total):
    h = float(cell.get("step_h", scen.step_h))
    scheme = cell.get("scheme", scen.scheme)
    variant = cell.get("kd_variant", scen.kd_variant)
    row = {"index": index, "step_h": h, "scheme": scheme, "kd_variant": variant}
    n = max(1, round(t_total / h))
    cfg = scen.config(step_h=h, scheme=DiscreteGradientScheme.named(scheme), kd_variant=variant)
    sub = replace(scen, step_h=h, kd_variant=variant, scheme=scheme)
    status = "ok"
    try:
        traj = integrate(scen.system, cfg, scen.initial_state, n, scenario_id=scen.name)
    except IntegrationAborted as exc:
        traj = exc.trajectory
        status = "solver-failure"
    report = full_audit(sub, traj)
    e = traj.energies
    row.update({
        "n_steps": len(traj) - 1,
        "status": status,
        "energy_drift": float(np.max(np.abs(e - e[0])) / (1 + abs(e[0]))),
        "min_dS": float(np.min(traj.delta_entropies[1:])) if len(traj) > 1 else 0.0,
        "final_S": float(traj.entropies[-1]),
        "max_solver_iters": int(max(r.solver_iters for r in traj.records)),
        "passed": report.passed and status == "ok",
    })
    return row


def cmd_sweep(args):
    scen = load_scenario(args.scenario)
    grid = _load_grid(args.grid)
    keys = list(grid)
    cells = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
    for cell in cells:
        scen.config(step_h=float(cell.get("step_h", scen.step_h)),
                    scheme=DiscreteGradientScheme.named(cell.get("scheme", scen.scheme)),
                    kd_variant=cell.get("kd_variant", scen.kd_variant))
    t_total = scen.step_h * scen.n_steps
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(lambda ic: _sweep_cell(scen, ic[0], ic[1], t_total), enumerate(cells)))
    rows.sort(key=lambda r: r["index"])
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    _emit({"scenario": scen.name, "t_total": t_total, "rows": rows,
           "overall": "pass" if all(r["passed"] for r in rows) else "fail"}, args.report)
    if any(r["status"] != "ok" for r in rows):
        return EXIT_SOLVER
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_AUDIT


def build_parser():
    p = _Parser(prog="metriplectic", description="Energy-conserving, entropy-producing integrators.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="integrate a scenario and write the trajectory CSV")
    r.add_argument("--scenario", required=True, help="scenario file or preset name")
    r.add_argument("--out", required=True)
    r.add_argument("--method", choices=("metriplectic", "rk4"), default="metriplectic")
    r.add_argument("--n-steps", type=int, default=None, help="override the scenario's n_steps")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="audit a trajectory (computed if --traj is omitted)")
    c.add_argument("--scenario", required=True)
    c.add_argument("--traj")
    c.add_argument("--report", help="also write the JSON report here")
    c.set_defaults(func=cmd_check)

    v = sub.add_parser("converge", help="empirical convergence order")
    v.add_argument("--scenario", required=True)
    v.add_argument("--h-list", required=True, help="comma-separated, strictly decreasing")
    v.add_argument("--t-final", type=float, default=10.0)
    v.add_argument("--method", choices=("metriplectic", "rk4"), default="metriplectic")
    v.add_argument("--report")
    v.set_defaults(func=cmd_converge)

    s = sub.add_parser("sweep", help="run a grid of step sizes / schemes / dissipation variants")
    s.add_argument("--scenario", required=True)
    s.add_argument("--grid", required=True, help="TOML file with arrays step_h, scheme, kd_variant")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--csv", help="also write the summary table as CSV")
    s.add_argument("--report")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
