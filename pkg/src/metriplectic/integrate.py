"""Energy-conserving, entropy-producing one-step integrator.

One step solves, for ``x'`` and ``z = (x + x') / 2``::

    (x' - x) / h = Pi(z) dg(x, x') + K_d(z) grad S(z)

where ``dg`` is a discrete gradient of ``H`` and ``K_d`` is a PSD matrix
with ``dg`` in its kernel. Skew-symmetry of ``Pi`` and the kernel property
make ``H(x') == H(x)`` up to the solver tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np

from . import kernels
from .brackets import MetricField, MetriplecticSystem, as_state, psd_from_covector
from .dgrad import DiscreteGradientScheme, Kind, discrete_gradient
from .errors import ConfigurationError, IntegrationAborted, StepFailure
from .liealg import RigidBodyPreset

SOLVERS = ("fixed-point", "newton")
KD_VARIANTS = ("unscaled", "scaled")
STALL_LIMIT = 5


@dataclass(frozen=True)
class IntegratorConfig:
    """Step size, nonlinear solver and discretisation choices.

    ``solver_tol`` bounds the max-norm step residual relative to
    ``1 + |x|``. ``use_kernel`` allows the compiled rigid body fast path
    when the system supports it.
    """

    step_h: float
    solver: str = "fixed-point"
    solver_tol: float = 1e-13
    max_iters: int = 200
    kd_variant: str = "unscaled"
    scheme: DiscreteGradientScheme = field(default_factory=DiscreteGradientScheme)
    use_kernel: bool = True

    def __post_init__(self):
        if not (self.step_h > 0 and math.isfinite(self.step_h)):
            raise ConfigurationError(f"step_h must be positive, got {self.step_h}")
        if not self.solver_tol > 0:
            raise ConfigurationError(f"solver_tol must be positive, got {self.solver_tol}")
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.kd_variant not in KD_VARIANTS:
            raise ConfigurationError(f"kd_variant must be one of {KD_VARIANTS}, got {self.kd_variant!r}")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be at least 1")


@dataclass(frozen=True)
class StepRecord:
    t: float
    state: np.ndarray
    energy: float
    entropy: float
    delta_entropy: float
    solver_iters: int
    residual: float


@dataclass
class Trajectory:
    records: List[StepRecord]
    config: IntegratorConfig
    scenario_id: str = ""
    method: str = "metriplectic"
    truncated: bool = False

    def __len__(self):
        return len(self.records)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def states(self) -> np.ndarray:
        return np.array([r.state for r in self.records])

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    @property
    def entropies(self) -> np.ndarray:
        return np.array([r.entropy for r in self.records])

    @property
    def delta_entropies(self) -> np.ndarray:
        return np.array([r.delta_entropy for r in self.records])


def build_kd(metric, dg_value, z, variant: str = "unscaled") -> np.ndarray:
    """Discrete dissipative matrix with ``dg_value`` in its kernel.

    unscaled: ``C G^-1(z) - (G^-1 dg)(G^-1 dg)^T`` with ``C = dg . G^-1 dg``.
    scaled: the same multiplied by ``C``.
    """
    z = np.asarray(z, dtype=float)
    g_inv = metric(z) if callable(metric) else np.asarray(metric, dtype=float)
    dg = np.asarray(dg_value, dtype=float)
    k = psd_from_covector(g_inv, dg)
    if variant == "scaled":
        k = (dg @ g_inv @ dg) * k
    elif variant != "unscaled":
        raise ConfigurationError(f"unknown kd variant {variant!r}")
    return k


def _metric_of(system: MetriplecticSystem) -> MetricField:
    if system.metric is None:
        raise ConfigurationError("the integrator needs a system with a metric")
    return system.metric


def step_rhs(system: MetriplecticSystem, config: IntegratorConfig, x: np.ndarray, xp: np.ndarray) -> np.ndarray:
    """Right-hand side of the step equation at the pair ``(x, x')``."""
    z = 0.5 * (x + xp)
    dg = discrete_gradient(config.scheme, system.hamiltonian, x, xp)
    kd = build_kd(_metric_of(system), dg, z, config.kd_variant)
    return system.pi(z) @ dg + kd @ system.entropy.gradient(z)


def _fixed_point(system, config, x, xp, scale):
    h = config.step_h
    prev = math.inf
    stall = 0
    res = math.inf
    for it in range(1, config.max_iters + 1):
        new = x + h * step_rhs(system, config, x, xp)
        res = float(np.max(np.abs(new - xp))) / scale
        xp = new
        if res <= config.solver_tol:
            return xp, it, res, True
        stall = stall + 1 if res >= prev else 0
        if stall >= STALL_LIMIT or not math.isfinite(res):
            return xp, it, res, False
        prev = res
    return xp, config.max_iters, res, False


def _newton(system, config, x, xp, scale, used):
    h = config.step_h
    n = x.size
    tol = config.solver_tol

    def resid(y):
        return y - x - h * step_rhs(system, config, x, y)

    r = resid(xp)
    res = float(np.max(np.abs(r))) / scale
    it = 0
    while res > tol and it < config.max_iters and math.isfinite(res):
        step = np.finfo(float).eps ** (1.0 / 3.0) * (1.0 + np.max(np.abs(xp)))
        jac = np.empty((n, n))
        e = np.zeros(n)
        for j in range(n):
            e[j] = step
            jac[:, j] = (resid(xp + e) - resid(xp - e)) / (2.0 * step)
            e[j] = 0.0
        try:
            xp = xp - np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            break
        r = resid(xp)
        res = float(np.max(np.abs(r))) / scale
        it += 1
    return xp, used + it, res, res <= tol


def solve_step(system: MetriplecticSystem, config: IntegratorConfig, x) -> tuple:
    """Solve the implicit step from ``x``; returns ``(x', iterations, residual)``.

    Fixed-point iteration seeded by an explicit Euler predictor, switching to
    a finite-difference Newton solve when the residual stops contracting.

    Raises
    ------
    StepFailure
        If neither solver reaches ``solver_tol`` within ``max_iters``.
    """
    x = np.asarray(x, dtype=float)
    scale = 1.0 + float(np.max(np.abs(x)))
    xp = x + config.step_h * step_rhs(system, config, x, x)
    # a diverging iteration is detected from the residual; keep it quiet
    with np.errstate(over="ignore", invalid="ignore"):
        return _solve(system, config, x, xp, scale)


def _solve(system, config, x, xp, scale):
    used = 0
    if config.solver == "fixed-point":
        xp, used, res, ok = _fixed_point(system, config, x, xp, scale)
        if ok:
            return xp, used, res
        if not np.all(np.isfinite(xp)):
            xp = x.copy()
    xp, used, res, ok = _newton(system, config, x, xp, scale, used)
    if not ok:
        raise StepFailure(f"step solve did not converge (residual {res:.3e})", residual=res, iterations=used)
    return xp, used, res


def metriplectic_step(system: MetriplecticSystem, config: IntegratorConfig, x, t: float = 0.0):
    """Advance one step; returns ``(x', record)`` with the record at ``x'``."""
    x = as_state(x)
    xp, iters, res = solve_step(system, config, x)
    s_new = system.entropy(xp)
    rec = StepRecord(
        t=t + config.step_h,
        state=xp,
        energy=system.hamiltonian(xp),
        entropy=s_new,
        delta_entropy=s_new - system.entropy(x),
        solver_iters=int(iters),
        residual=float(res),
    )
    return xp, rec


def _kernel_spec(system: MetriplecticSystem, config: IntegratorConfig) -> Optional[RigidBodyPreset]:
    preset = system.preset
    if not config.use_kernel or not isinstance(preset, RigidBodyPreset) or preset.entropy_power is None:
        return None
    # every discrete gradient of a diagonal quadratic energy equals z / I
    if config.scheme.kind not in (Kind.MIDPOINT, Kind.MEAN_VALUE, Kind.COORDINATE_INCREMENT):
        return None
    return preset


def _records_from_states(system, states, iters, resid, h, t0):
    out = []
    s_prev = None
    for k, x in enumerate(states):
        s = system.entropy(x)
        out.append(StepRecord(
            t=t0 + k * h,
            state=np.array(x),
            energy=system.hamiltonian(x),
            entropy=s,
            delta_entropy=0.0 if s_prev is None else s - s_prev,
            solver_iters=0 if k == 0 else int(iters[k - 1]),
            residual=0.0 if k == 0 else float(resid[k - 1]),
        ))
        s_prev = s
    return out


def _kernel_states(system, config, x0, n_steps, preset):
    """States, iteration counts and residuals via the compiled kernel.

    Steps the kernel cannot solve by fixed-point iteration are redone with
    the generic solver (which adds the Newton fallback).
    """
    states = [x0]
    iters: List[int] = []
    resid: List[float] = []
    x = x0
    scaled = config.kd_variant == "scaled"
    remaining = n_steps
    while remaining > 0:
        st, it, rs, done = kernels.rigid_body_run(
            preset.inertia, x, config.step_h, remaining, preset.entropy_power,
            scaled, config.solver_tol, config.max_iters,
        )
        states.extend(np.array(st[1:done + 1]))
        iters.extend(int(v) for v in it[:done])
        resid.extend(float(v) for v in rs[:done])
        x = np.array(st[done])
        remaining -= done
        if remaining == 0:
            break
        try:
            x, n_it, r = solve_step(system, config, x)
        except StepFailure as exc:
            return states, iters, resid, exc
        states.append(x)
        iters.append(int(n_it))
        resid.append(float(r))
        remaining -= 1
    return states, iters, resid, None


def integrate(system: MetriplecticSystem, config: IntegratorConfig, x0, n_steps: int,
              scenario_id: str = "", t0: float = 0.0) -> Trajectory:
    """Apply :func:`metriplectic_step` ``n_steps`` times from ``x0``.

    Raises
    ------
    IntegrationAborted
        On a step failure; ``exc.trajectory`` holds the records computed so
        far, flagged ``truncated``.
    """
    if n_steps < 0:
        raise ConfigurationError("n_steps must be nonnegative")
    x0 = as_state(x0)
    h = config.step_h
    preset = _kernel_spec(system, config)
    failure = None
    if preset is not None:
        states, iters, resid, failure = _kernel_states(system, config, x0, n_steps, preset)
    else:
        states, iters, resid = [x0], [], []
        x = x0
        for _ in range(n_steps):
            try:
                x, n_it, r = solve_step(system, config, x)
            except StepFailure as exc:
                failure = exc
                break
            states.append(x)
            iters.append(n_it)
            resid.append(r)
    traj = Trajectory(_records_from_states(system, states, iters, resid, h, t0), config, scenario_id)
    if failure is not None:
        traj.truncated = True
        raise IntegrationAborted(
            f"step {len(states)} failed: {failure}", traj, failure
        ) from failure
    return traj


def rk4_step(rhs: Callable[[np.ndarray], np.ndarray], h: float, x) -> np.ndarray:
    """Classical fourth-order Runge-Kutta step."""
    x = np.asarray(x, dtype=float)
    k1 = rhs(x)
    k2 = rhs(x + 0.5 * h * k1)
    k3 = rhs(x + 0.5 * h * k2)
    k4 = rhs(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(system: MetriplecticSystem, h: float, x0, n_steps: int,
                  scenario_id: str = "", use_kernel: bool = True) -> Trajectory:
    """Non-conservative RK4 baseline on the continuous metriplectic field."""
    config = IntegratorConfig(step_h=h, use_kernel=use_kernel)
    x0 = as_state(x0)
    preset = _kernel_spec(system, config)
    if preset is not None:
        states = kernels.rk4_rigid_body_run(preset.inertia, x0, h, n_steps, preset.entropy_power)
    else:
        states = [x0]
        x = x0
        for _ in range(n_steps):
            x = rk4_step(system.vector_field, h, x)
            states.append(x)
    zeros = np.zeros(n_steps)
    recs = _records_from_states(system, states, zeros, zeros, h, 0.0)
    return Trajectory(recs, config, scenario_id, method="rk4")


class ConvergenceReport(NamedTuple):
    h_list: tuple
    errors: tuple
    order: float
    inconclusive: bool
    h_ref: float
    method: str


def _final_state(system, config, x0, t_final, h, method):
    n = _n_steps(t_final, h)
    if method == "rk4":
        return rk4_integrate(system, h, x0, n, use_kernel=config.use_kernel).records[-1].state
    return integrate(system, replace(config, step_h=h), x0, n).records[-1].state


def _n_steps(t_final, h):
    n = round(t_final / h)
    if n < 1 or abs(n * h - t_final) > 1e-9 * max(1.0, t_final):
        raise ConfigurationError(f"t_final={t_final} is not a whole number of steps of size {h}")
    return n


def convergence_study(system: MetriplecticSystem, config: IntegratorConfig, x0, t_final: float,
                      h_list: Sequence[float], method: str = "metriplectic",
                      floor: float = 1e-12) -> ConvergenceReport:
    """Empirical order from global errors at ``t_final``.

    The reference solution is the same method at ``min(h_list) / 20``.
    The order is the least-squares slope of ``log(error)`` against
    ``log(h)``; the study is flagged inconclusive when every error is
    below ``floor``.
    """
    hs = [float(v) for v in h_list]
    if len(hs) < 3:
        raise ConfigurationError("convergence study needs at least 3 step sizes")
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ConfigurationError("h_list must be strictly decreasing")
    if method not in ("metriplectic", "rk4"):
        raise ConfigurationError(f"unknown method {method!r}")
    h_ref = min(hs) / 20.0
    ref = _final_state(system, config, x0, t_final, h_ref, method)
    errors = []
    for h in hs:
        errors.append(float(np.max(np.abs(_final_state(system, config, x0, t_final, h, method) - ref))))
    inconclusive = max(errors) < floor or min(errors) == 0.0
    if inconclusive:
        order = float("nan")
    else:
        order = float(np.polyfit(np.log(hs), np.log(errors), 1)[0])
    return ConvergenceReport(tuple(hs), tuple(errors), order, inconclusive, h_ref, method)
