"""Trajectory CSV and JSON report serialisation.

CSV columns, in order: ``step, t, x_1..x_n, H, S, dS, solver_iters, residual``.
Floats are written with 17 significant digits, so a written trajectory
reads back bit-identical. Run metadata (method, step size, truncation) goes
to a sidecar ``<csv>.meta.json``.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .integrate import IntegratorConfig, StepRecord, Trajectory

FLOAT_FMT = "{:.17g}"


def header(n: int):
    return ["step", "t"] + [f"x_{i + 1}" for i in range(n)] + ["H", "S", "dS", "solver_iters", "residual"]


def meta_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".meta.json")


def write_trajectory(traj: Trajectory, path, error: str = None) -> None:
    path = Path(path)
    n = traj.records[0].state.size if traj.records else 0
    f = FLOAT_FMT.format
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header(n))
        for k, r in enumerate(traj.records):
            w.writerow([k, f(r.t)] + [f(v) for v in r.state]
                       + [f(r.energy), f(r.entropy), f(r.delta_entropy), r.solver_iters, f(r.residual)])
    meta = {
        "scenario_id": traj.scenario_id,
        "method": traj.method,
        "step_h": traj.config.step_h,
        "kd_variant": traj.config.kd_variant,
        "scheme": traj.config.scheme.name,
        "n_records": len(traj.records),
        "truncated": bool(traj.truncated),
        "error": error,
    }
    meta_path(path).write_text(json.dumps(meta, indent=2) + "\n")


def read_trajectory(path, config: IntegratorConfig = None) -> Trajectory:
    """Read a trajectory CSV (and its sidecar metadata when present).

    Raises
    ------
    ConfigurationError
        If the header or a row is malformed.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"trajectory file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigurationError(f"{path}: empty trajectory file")
    head = rows[0]
    n = len(head) - 7
    if n < 1 or head != header(n):
        raise ConfigurationError(f"{path}: unexpected header {head}")
    records = []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(head):
            raise ConfigurationError(f"{path}:{line}: expected {len(head)} columns, got {len(row)}")
        try:
            vals = [float(v) for v in row[1:]]
            records.append(StepRecord(
                t=vals[0],
                state=np.array(vals[1:1 + n]),
                energy=vals[1 + n],
                entropy=vals[2 + n],
                delta_entropy=vals[3 + n],
                solver_iters=int(row[-2]),
                residual=vals[-1],
            ))
        except ValueError as exc:
            raise ConfigurationError(f"{path}:{line}: {exc}") from None
    meta = {}
    mp = meta_path(path)
    if mp.exists():
        meta = json.loads(mp.read_text())
    if config is None:
        h = meta.get("step_h")
        if h is None:
            h = records[1].t - records[0].t if len(records) > 1 else 1.0
        config = IntegratorConfig(step_h=h, kd_variant=meta.get("kd_variant", "unscaled"))
    return Trajectory(records, config, meta.get("scenario_id", ""), meta.get("method", "metriplectic"),
                      bool(meta.get("truncated", False)))


def dump_json(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False)
