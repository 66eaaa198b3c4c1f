"""Scenario files: one TOML document describing a system, a run and a solver.

Example (the shipped ``relaxing-rigid-body`` preset)::

    name = "relaxing-rigid-body"
    initial_state = [0.001, -1.0, 0.001]
    step_h = 0.1
    n_steps = 2000
    scheme = "midpoint"
    kd_variant = "unscaled"
    seed = 0

    [system]
    kind = "rigid-body"
    inertia = [10.0, 5.0, 1.0]

    [solver]
    kind = "fixed-point"
    tol = 1e-13
    max_iters = 200

``system.kind`` is one of ``rigid-body``, ``lie-poisson`` or ``explicit``.
Scalar functions (``hamiltonian``, ``entropy``) are tables with exactly one
of ``preset``, ``quadratic`` or ``polynomial`` keys.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .brackets import (
    MetricField,
    MetriplecticSystem,
    ScalarField,
    Symmetry,
    TensorField,
    build_psd_from_metric,
)
from .dgrad import DiscreteGradientScheme, parse_kind
from .errors import ConfigurationError
from .harness import audit_system
from .integrate import IntegratorConfig
from .liealg import StructureConstants, lie_poisson_tensor, norm_power_field, rigid_body_system

VALIDATION_TOL = 1e-10
VALIDATION_SAMPLES = 20


class ScenarioError(ConfigurationError):
    """Scenario could not be parsed or does not describe a valid system."""


@dataclass
class Scenario:
    name: str
    system_kind: str
    system: MetriplecticSystem
    initial_state: np.ndarray
    step_h: float
    n_steps: int
    scheme: str = "midpoint"
    kd_variant: str = "unscaled"
    solver: str = "fixed-point"
    solver_tol: float = 1e-13
    max_iters: int = 200
    seed: int = 0
    inertia: Optional[tuple] = None
    source: Optional[str] = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.initial_state.size

    def config(self, **overrides) -> IntegratorConfig:
        kw = dict(
            step_h=self.step_h,
            solver=self.solver,
            solver_tol=self.solver_tol,
            max_iters=self.max_iters,
            kd_variant=self.kd_variant,
            scheme=DiscreteGradientScheme.named(self.scheme),
        )
        kw.update(overrides)
        return IntegratorConfig(**kw)


def preset_names():
    return sorted(p.name[:-5] for p in resources.files("metriplectic.presets").iterdir()
                  if p.name.endswith(".toml"))


def resolve(path_or_name) -> Path:
    """A scenario path, or the name of a shipped preset."""
    p = Path(path_or_name)
    if p.exists():
        return p
    name = str(path_or_name)
    if name in preset_names():
        return Path(str(resources.files("metriplectic.presets").joinpath(f"{name}.toml")))
    raise ScenarioError(f"scenario file not found: {path_or_name}")


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file (or preset name).

    Raises
    ------
    ScenarioError
        On parse errors (with line information), missing or malformed
        fields, or if the system fails its kernel / Casimir checks.
    """
    p = resolve(path)
    text = p.read_text()
    if not text.strip():
        raise ScenarioError(f"{p}: empty scenario file")
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{p}: parse error: {exc}") from None
    try:
        return _build(doc, str(p))
    except ScenarioError as exc:
        raise ScenarioError(f"{p}: {exc}") from None
    except ConfigurationError as exc:
        raise ScenarioError(f"{p}: {exc}") from None


def _get(doc, key, kind, where="", default=...):
    label = f"{where}.{key}" if where else key
    if key not in doc:
        if default is ...:
            raise ScenarioError(f"missing field '{label}'")
        return default
    val = doc[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
        expected = " or ".join(k.__name__ for k in kind) if isinstance(kind, tuple) else kind.__name__
        raise ScenarioError(f"field '{label}' must be {expected}, got {type(val).__name__}")
    return val


def _array(val, label, ndim):
    try:
        arr = np.array(val, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"field '{label}' must be a numeric array") from None
    if arr.ndim != ndim or not np.all(np.isfinite(arr)):
        raise ScenarioError(f"field '{label}' must be a finite {ndim}-d array")
    return arr


def scalar_from_spec(spec, label, n, inertia=None) -> ScalarField:
    if not isinstance(spec, dict):
        raise ScenarioError(f"field '{label}' must be a table")
    keys = {"preset", "quadratic", "polynomial"} & set(spec)
    if len(keys) != 1:
        raise ScenarioError(f"field '{label}' needs exactly one of preset / quadratic / polynomial")
    key = keys.pop()
    if key == "preset":
        name = spec["preset"]
        if name == "norm-squared":
            return norm_power_field(1)
        if name == "norm-quartic":
            return norm_power_field(2)
        if name == "rigid-body-energy":
            inv = 1.0 / _array(spec.get("inertia", inertia), f"{label}.inertia", 1)
            return ScalarField(lambda p: 0.5 * float(np.sum(inv * p * p)), lambda p: inv * p,
                               name="rigid-body-energy")
        raise ScenarioError(f"field '{label}.preset': unknown preset {name!r}")
    if key == "quadratic":
        a = _array(spec["quadratic"], f"{label}.quadratic", 2)
        if a.shape != (n, n):
            raise ScenarioError(f"field '{label}.quadratic' must be {n}x{n}")
        return ScalarField.quadratic(a)
    terms = spec["polynomial"]
    if not isinstance(terms, list) or not terms:
        raise ScenarioError(f"field '{label}.polynomial' must be a non-empty array of tables")
    coeffs, powers = [], []
    for i, t in enumerate(terms):
        where = f"{label}.polynomial[{i}]"
        if not isinstance(t, dict):
            raise ScenarioError(f"field '{where}' must be a table with coeff and powers")
        coeffs.append(_get(t, "coeff", float, where))
        pw = _get(t, "powers", list, where)
        if len(pw) != n or not all(isinstance(v, int) and v >= 0 for v in pw):
            raise ScenarioError(f"field '{where}.powers' must be {n} nonnegative integers")
        powers.append(pw)
    return ScalarField.polynomial(coeffs, powers)


def _metric_from_spec(sysdoc, n):
    if "metric" not in sysdoc:
        return MetricField.euclidean(n)
    g = _array(sysdoc["metric"], "system.metric", 2)
    if g.shape != (n, n):
        raise ScenarioError(f"field 'system.metric' must be {n}x{n}")
    return MetricField.constant(g)


def _build(doc, source) -> Scenario:
    name = _get(doc, "name", str, default="scenario")
    x0 = _array(_get(doc, "initial_state", list), "initial_state", 1)
    n = x0.size
    if n == 0:
        raise ScenarioError("field 'initial_state' must be non-empty")
    step_h = _get(doc, "step_h", float)
    if not step_h > 0:
        raise ScenarioError("field 'step_h' must be positive")
    n_steps = _get(doc, "n_steps", int)
    if n_steps < 0:
        raise ScenarioError("field 'n_steps' must be nonnegative")
    scheme = _get(doc, "scheme", str, default="midpoint")
    parse_kind(scheme)
    kd_variant = _get(doc, "kd_variant", str, default="unscaled")
    seed = _get(doc, "seed", int, default=0)
    solver_doc = _get(doc, "solver", dict, default={})
    solver = _get(solver_doc, "kind", str, "solver", default="fixed-point")
    tol = _get(solver_doc, "tol", float, "solver", default=1e-13)
    max_iters = _get(solver_doc, "max_iters", int, "solver", default=200)

    sysdoc = _get(doc, "system", dict)
    kind = _get(sysdoc, "kind", str, "system")
    inertia = None
    if kind == "rigid-body":
        if n != 3:
            raise ScenarioError("rigid-body scenarios need a 3-component initial_state")
        inertia = tuple(_array(_get(sysdoc, "inertia", list, "system"), "system.inertia", 1))
        metric = _metric_from_spec(sysdoc, 3) if "metric" in sysdoc else None
        entropy = "quadratic"
        if "entropy" in sysdoc:
            spec = sysdoc["entropy"]
            shortcut = {"norm-squared": "quadratic", "norm-quartic": "quartic"}
            if isinstance(spec, dict) and set(spec) == {"preset"} and spec["preset"] in shortcut:
                entropy = shortcut[spec["preset"]]
            else:
                entropy = scalar_from_spec(spec, "system.entropy", 3)
        system = rigid_body_system(inertia, entropy=entropy, metric=metric)
    elif kind == "lie-poisson":
        sc_spec = _get(sysdoc, "structure_constants", (str, list), "system")
        if sc_spec == "so3":
            sc = StructureConstants.so3()
        elif isinstance(sc_spec, str):
            raise ScenarioError(f"field 'system.structure_constants': unknown algebra {sc_spec!r}")
        else:
            sc = StructureConstants(_array(sc_spec, "system.structure_constants", 3))
        if sc.dim != n:
            raise ScenarioError(f"algebra dimension {sc.dim} does not match initial_state length {n}")
        h = scalar_from_spec(_get(sysdoc, "hamiltonian", dict, "system"), "system.hamiltonian", n)
        s = scalar_from_spec(_get(sysdoc, "entropy", dict, "system"), "system.entropy", n)
        metric = _metric_from_spec(sysdoc, n)
        system = MetriplecticSystem(lie_poisson_tensor(sc), build_psd_from_metric(metric, h), h, s, metric)
    elif kind == "explicit":
        pi_spec = _get(sysdoc, "pi", dict, "system")
        a = _array(pi_spec.get("constant", np.zeros((n, n)).tolist()), "system.pi.constant", 2)
        b = _array(pi_spec.get("linear", np.zeros((n, n, n)).tolist()), "system.pi.linear", 3)
        if a.shape != (n, n) or b.shape != (n, n, n):
            raise ScenarioError(f"field 'system.pi' must hold an {n}x{n} constant and {n}x{n}x{n} linear part")
        pi = TensorField(lambda x: a + b @ x, Symmetry.SKEW, name="explicit")
        h = scalar_from_spec(_get(sysdoc, "hamiltonian", dict, "system"), "system.hamiltonian", n)
        s = scalar_from_spec(_get(sysdoc, "entropy", dict, "system"), "system.entropy", n)
        metric = _metric_from_spec(sysdoc, n)
        system = MetriplecticSystem(pi, build_psd_from_metric(metric, h), h, s, metric)
    else:
        raise ScenarioError(f"field 'system.kind': unknown kind {kind!r}")

    report = audit_system(system, n, n_samples=VALIDATION_SAMPLES, seed=seed, tol=VALIDATION_TOL)
    if not report.passed:
        bad = [f"{c.name} residual {c.max_residual:.3e} > {c.threshold:.0e}" for c in report.checks if not c.passed]
        raise ScenarioError("invalid metriplectic system: " + "; ".join(bad))

    scen = Scenario(
        name=name, system_kind=kind, system=system, initial_state=x0, step_h=step_h,
        n_steps=n_steps, scheme=scheme, kd_variant=kd_variant, solver=solver,
        solver_tol=tol, max_iters=max_iters, seed=seed, inertia=inertia, source=source, raw=doc,
    )
    scen.config()
    return scen
