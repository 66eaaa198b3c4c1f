"""Invariant audits for trajectories and systems."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .brackets import MetricField, MetriplecticSystem, ScalarField, build_psd_from_metric, check_casimir
from .integrate import Trajectory
from .liealg import (
    ForceMap,
    QuadraticLagrangian,
    StructureConstants,
    coadjoint,
    force_from_casimir,
    forced_lie_poisson_rhs,
    induced_symmetric_tensor,
    lie_poisson_tensor,
    norm_power_field,
    _kg_matrix,
)

ENERGY_TOL = 1e-10
ENTROPY_TOL = 1e-13
INVARIANT_TOL = 1e-10
SAMPLE_BOX = 2.0


@dataclass
class AuditCheck:
    name: str
    max_residual: float
    threshold: float
    passed: bool
    worst_state: Optional[List[float]] = None

    def to_dict(self):
        r = self.max_residual
        return {
            "name": self.name,
            "max_residual": None if not np.isfinite(r) else float(r),
            "threshold": float(self.threshold),
            "passed": bool(self.passed),
            "worst_state": self.worst_state,
        }


@dataclass
class AuditReport:
    checks: List[AuditCheck] = field(default_factory=list)
    seed: Optional[int] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, residual, threshold, worst_state=None, passed=None):
        ok = bool(residual <= threshold) if passed is None else bool(passed)
        ws = None if worst_state is None else [float(v) for v in np.asarray(worst_state)]
        self.checks.append(AuditCheck(name, float(residual), float(threshold), ok, ws))
        return self

    def extend(self, other: "AuditReport") -> "AuditReport":
        self.checks.extend(other.checks)
        if self.seed is None:
            self.seed = other.seed
        return self

    def __getitem__(self, name) -> AuditCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {
            "overall": "pass" if self.passed else "fail",
            "seed": self.seed,
            "checks": [c.to_dict() for c in self.checks],
        }


def sample_states(n: int, count: int, seed: int, box: float = SAMPLE_BOX) -> np.ndarray:
    """``count`` states uniform on ``[-box, box]^n``."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-box, box, size=(count, n))


def _drift(values):
    v = np.asarray(values, dtype=float)
    d = np.abs(v - v[0]) / (1.0 + abs(v[0]))
    k = int(np.argmax(d))
    return float(d[k]), k


def audit_trajectory(traj: Trajectory, system: MetriplecticSystem,
                     extra_invariants: Sequence[ScalarField] = (),
                     energy_tol: float = ENERGY_TOL, entropy_tol: float = ENTROPY_TOL,
                     invariant_tol: float = INVARIANT_TOL) -> AuditReport:
    """Energy drift, entropy monotonicity and drift of extra conserved quantities.

    Values are recomputed from the stored states. Drifts are relative to
    ``1 + |initial value|``; the entropy check bounds the largest per-step
    decrease ``max(0, -dS)``.
    """
    if not traj.records:
        raise ValueError("cannot audit an empty trajectory")
    states = traj.states
    report = AuditReport()
    d, k = _drift([system.hamiltonian(x) for x in states])
    report.add("energy-drift", d, energy_tol, states[k])
    s = np.array([system.entropy(x) for x in states])
    if s.size > 1:
        deficit = np.maximum(0.0, -np.diff(s))
        k = int(np.argmax(deficit))
        report.add("entropy-decrease", float(deficit[k]), entropy_tol, states[k + 1])
    else:
        report.add("entropy-decrease", 0.0, entropy_tol, states[0])
    for j, inv in enumerate(extra_invariants):
        d, k = _drift([inv(x) for x in states])
        report.add(f"invariant-drift:{inv.name or j}", d, invariant_tol, states[k])
    return report


def entropy_rate_deviations(traj: Trajectory, system: MetriplecticSystem, kd_variant: Optional[str] = None):
    """Per-step ``(dS / h, (S, S)(z))`` with ``z`` the step midpoint.

    With the scaled discrete dissipation the reference rate carries the
    extra factor ``grad H . G^-1 grad H`` at ``z``.
    """
    variant = kd_variant or traj.config.kd_variant
    states = traj.states
    times = traj.times
    s = np.array([system.entropy(x) for x in states])
    rates = np.diff(s) / np.diff(times) if s.size > 1 else np.zeros(0)
    ref = np.empty(rates.size)
    for k in range(rates.size):
        z = 0.5 * (states[k] + states[k + 1])
        gs = system.entropy.gradient(z)
        val = gs @ system.kappa(z) @ gs
        if variant == "scaled":
            gh = system.hamiltonian.gradient(z)
            g_inv = system.metric(z) if system.metric is not None else np.eye(z.size)
            val *= gh @ g_inv @ gh
        ref[k] = val
    return rates, ref


def entropy_rate_check(traj: Trajectory, system: MetriplecticSystem, rel_tol: float = 0.05,
                       abs_tol: float = 1e-12, entropy_tol: float = ENTROPY_TOL,
                       kd_variant: Optional[str] = None) -> AuditReport:
    """Compare ``dS / h`` per step with the production rate ``(S, S)`` at the midpoint.

    The ``entropy-rate`` residual is ``max |dS/h - (S,S)| / (|(S,S)| + abs_tol/rel_tol)``
    against ``rel_tol``, i.e. a step passes when
    ``|dS/h - (S,S)| <= rel_tol |(S,S)| + abs_tol``.
    """
    rates, ref = entropy_rate_deviations(traj, system, kd_variant)
    states = traj.states
    report = AuditReport()
    if rates.size == 0:
        report.add("entropy-rate", 0.0, rel_tol, states[0])
        report.add("entropy-rate-sign", 0.0, entropy_tol, states[0])
        return report
    norm = np.abs(rates - ref) / (np.abs(ref) + abs_tol / rel_tol)
    k = int(np.argmax(norm))
    report.add("entropy-rate", float(norm[k]), rel_tol, states[k + 1])
    h = np.diff(traj.times)
    deficit = np.maximum(0.0, -rates * h)
    k = int(np.argmax(deficit))
    report.add("entropy-rate-sign", float(deficit[k]), entropy_tol, states[k + 1])
    return report


def _rel(a, b, scale):
    # scale: magnitude of the individual products summed into a and b
    den = max(np.max(np.abs(a)), np.max(np.abs(b)), scale)
    return 0.0 if den == 0 else float(np.max(np.abs(a - b)) / den)


def cross_validate_formulations(sc: StructureConstants, inertia, kg, n_samples: int = 100,
                                seed: int = 0, tol: float = 1e-12) -> AuditReport:
    """Forced Lie-Poisson dynamics against the metriplectic form of the same system.

    Energy ``H = mu . M^-1 mu / 2``, Casimir ``C = |mu|^2 / 2`` and the
    force ``kg [xi, grad C]`` are used. Three comparisons are made at
    seeded random states, each relative to the magnitude of the products
    being summed:

    ``conservative``  unforced right-hand side vs ``Pi grad H``;
    ``dissipative``   force term vs ``induced_symmetric_tensor . grad C``;
    ``metric-form``   full right-hand side vs ``Pi grad H + K grad S`` with
                      ``K`` from the Euclidean metric. Only run when ``kg``
                      is the identity, the case where the two coincide.
    """
    kgm = _kg_matrix(kg)
    h = QuadraticLagrangian(inertia).hamiltonian()
    c = norm_power_field(1)
    pi = lie_poisson_tensor(sc)
    force = force_from_casimir(sc, kgm, c)
    ktilde = induced_symmetric_tensor(sc, kgm, h)
    kmetric = build_psd_from_metric(MetricField.euclidean(sc.dim), h)
    with_metric = kgm.shape == (sc.dim, sc.dim) and np.array_equal(kgm, np.eye(sc.dim))
    zero = ForceMap.zero()
    kg_norm = float(np.max(np.abs(kgm))) if kgm.size else 0.0

    worst = {}

    def note(name, val, mu):
        if name not in worst or val > worst[name][0]:
            worst[name] = (val, mu)

    for mu in sample_states(sc.dim, n_samples, seed):
        gh = h.gradient(mu)
        gc = c.gradient(mu)
        cons_scale = np.max(np.abs(mu)) * np.max(np.abs(gh))
        diss_scale = kg_norm * np.max(np.abs(gh)) ** 2 * np.max(np.abs(gc))
        cons_lp = forced_lie_poisson_rhs(sc, h, zero, mu)
        note("conservative", _rel(cons_lp, pi(mu) @ gh, cons_scale), mu)
        diss_lp = coadjoint(sc, gh, force(gh, mu))
        note("dissipative", _rel(diss_lp, ktilde(mu) @ gc, diss_scale), mu)
        if with_metric:
            full = forced_lie_poisson_rhs(sc, h, force, mu)
            note("metric-form", _rel(full, pi(mu) @ gh + kmetric(mu) @ gc, cons_scale + diss_scale), mu)

    report = AuditReport(seed=seed)
    for name in ("conservative", "dissipative") + (("metric-form",) if with_metric else ()):
        val, mu = worst[name]
        report.add(f"cross-validation:{name}", val, tol, mu)
    return report


def audit_system(system: MetriplecticSystem, n: int, n_samples: int = 100, seed: int = 0,
                 tol: float = 1e-12) -> AuditReport:
    """Structural checks of a system at seeded random states.

    Skew and PSD residuals of the tensors, ``|K grad H|`` and the Casimir
    residual of the entropy.
    """
    samples = sample_states(n, n_samples, seed)
    report = AuditReport(seed=seed)
    report.add("poisson-skew", system.pi.symmetry_residual(samples), tol)
    report.add("dissipation-psd", system.kappa.symmetry_residual(samples), tol)
    report.add("kernel-residual", system.kernel_residual(samples), tol)
    report.add("entropy-casimir", check_casimir(system.pi, system.entropy, samples), tol)
    return report
