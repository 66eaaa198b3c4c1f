"""Acceptance criteria, one test per criterion.

Each test records a one-line verdict; the lines are printed at the end of
the pytest session (and directly when this file is run as a script).
"""
import time

import numpy as np
import pytest

from metriplectic import (
    DiscreteGradientScheme,
    ForceMap,
    IntegratorConfig,
    MetricField,
    ScalarField,
    StructureConstants,
    build_kd,
    build_psd_from_metric,
    convergence_study,
    discrete_gradient,
    integrate,
    rigid_body_system,
    rk4_integrate,
    verify_axioms,
)
from metriplectic.dgrad import Kind
from metriplectic.harness import ENERGY_TOL, audit_trajectory, cross_validate_formulations, sample_states
from metriplectic.liealg import casimir_rate, force_from_casimir, forced_lie_poisson_rhs, so3_preset
from metriplectic.scenario import load_scenario

from oracles import rigid_body_oracle

VERDICTS = {}

INERTIA = (10.0, 5.0, 1.0)
X0 = np.array([0.001, -1.0, 0.001])
H_STEP = 0.1


def record(number, ok, detail):
    VERDICTS[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(VERDICTS[number])


def drift(values):
    v = np.asarray(values)
    return float(np.max(np.abs(v - v[0])) / (1 + abs(v[0])))


@pytest.fixture(scope="module")
def preset():
    scen = load_scenario("relaxing-rigid-body")
    assert scen.inertia == INERTIA and scen.step_h == H_STEP
    np.testing.assert_array_equal(scen.initial_state, X0)
    return scen


def test_criterion_1_figure_run(preset):
    t0 = time.perf_counter()
    traj = integrate(preset.system, preset.config(), preset.initial_state, 2000)
    elapsed = time.perf_counter() - t0
    d = drift(traj.energies)
    min_ds = float(np.min(traj.delta_entropies[1:]))
    # the generic numpy path must agree with the compiled fast path
    generic = integrate(preset.system, preset.config(use_kernel=False), preset.initial_state, 2000)
    gap = float(np.max(np.abs(generic.states - traj.states)))
    d_gen = drift(generic.energies)
    min_gen = float(np.min(generic.delta_entropies[1:]))
    ok = (d <= 1e-10 and min_ds >= -1e-13 and elapsed < 5.0 and len(traj) == 2001
          and d_gen <= 1e-10 and min_gen >= -1e-13 and gap <= 1e-12)
    record(1, ok, f"energy drift {d:.2e} (<= 1e-10), min dS {min_ds:.2e} (>= -1e-13), {elapsed:.2f} s (< 5 s); "
                  f"generic path drift {d_gen:.2e}, min dS {min_gen:.2e}, max state gap {gap:.1e}")
    assert ok


def test_criterion_2_equilibration(preset):
    traj = integrate(preset.system, preset.config(), preset.initial_state, round(500 / H_STEP))
    target = INERTIA[0] * preset.system.hamiltonian(X0)
    s_end = traj.entropies[-1]
    gap = abs(s_end - target)
    ok = gap <= 1e-3 and traj.times[-1] == pytest.approx(500.0)
    record(2, ok, f"S(t=500) = {s_end:.10f}, I1*H(x0) = {target:.10f}, gap {gap:.2e} (<= 1e-3)")
    assert ok


def test_criterion_3_formulation_equivalence():
    rep = cross_validate_formulations(StructureConstants.so3(), INERTIA, np.eye(3), n_samples=100, seed=0, tol=1e-12)
    worst = rep["cross-validation:metric-form"].max_residual
    # independent check against the hand-expanded relaxed rigid body equations
    sc, _, h, c = so3_preset(INERTIA)
    force = force_from_casimir(sc, np.eye(3), c)
    oracle = 0.0
    for p in sample_states(3, 100, 0):
        got = forced_lie_poisson_rhs(sc, h, force, p)
        want = rigid_body_oracle(INERTIA, p)
        oracle = max(oracle, float(np.max(np.abs(got - want)) / np.max(np.abs(want))))
    ok = rep.passed and worst <= 1e-12 and oracle <= 1e-12
    record(3, ok, f"max relative discrepancy {worst:.2e} (<= 1e-12); vs hand-expanded ODEs {oracle:.2e}")
    assert ok


def _test_hamiltonians():
    _, _, quad, _ = so3_preset(INERTIA)
    inv = 1.0 / np.array(INERTIA)
    quartic = ScalarField(
        lambda p: float(0.5 * np.sum(inv * p * p) + 0.1 * np.sum(p**4)),
        lambda p: inv * p + 0.4 * p**3,
        name="quartic-perturbation",
    )
    coupled = ScalarField.polynomial([1.0, 0.5, -0.3], [[1, 1, 1], [2, 0, 0], [0, 2, 1]])
    return [quad, quartic, coupled]


def test_criterion_4_discrete_gradient_axioms():
    rng = np.random.default_rng(4)
    pairs = rng.uniform(-2, 2, size=(1000, 2, 3))
    worst_dir, worst_con = 0.0, 0.0
    lines = []
    for kind in Kind:
        scheme = DiscreteGradientScheme(kind)
        for h in _test_hamiltonians():
            rep = verify_axioms(scheme, h, pairs)
            worst_dir = max(worst_dir, rep.directional)
            worst_con = max(worst_con, rep.consistency)
            lines.append((kind.value, h.name, rep))
    ok = worst_dir <= 1e-11 and worst_con <= 1e-13
    record(4, ok, f"3 schemes x 3 Hamiltonians x 1000 pairs: directional {worst_dir:.2e} (<= 1e-11), "
                  f"consistency {worst_con:.2e} (<= 1e-13)")
    assert ok, lines


def test_criterion_5_kernel_psd():
    sc, _, h, _ = so3_preset(INERTIA)
    metric = MetricField.euclidean(3)
    kappa = build_psd_from_metric(metric, h)
    scheme = DiscreteGradientScheme()
    xs = sample_states(3, 100, 5)
    xps = sample_states(3, 100, 6)
    eig, kern = 0.0, 0.0
    for x, xp in zip(xs, xps):
        k = kappa(x)
        gh = h.gradient(x)
        n = np.linalg.norm(k)
        eig = max(eig, -np.linalg.eigvalsh(k)[0] / n)
        kern = max(kern, np.linalg.norm(k @ gh) / (n * np.linalg.norm(gh)))
        dg = discrete_gradient(scheme, h, x, xp)
        for variant in ("unscaled", "scaled"):
            kd = build_kd(metric, dg, 0.5 * (x + xp), variant)
            n = np.linalg.norm(kd)
            eig = max(eig, -np.linalg.eigvalsh(kd)[0] / n)
            kern = max(kern, np.linalg.norm(kd @ dg) / (n * np.linalg.norm(dg)))
    ok = eig <= 1e-12 and kern <= 1e-12
    record(5, ok, f"worst -min eig / norm {eig:.2e} (<= 1e-12), worst kernel residual {kern:.2e} (<= 1e-12)")
    assert ok


def test_criterion_6_convergence_order(preset):
    hs = [0.2, 0.1, 0.05, 0.025]
    t0 = time.perf_counter()
    meta = convergence_study(preset.system, preset.config(), X0, 10.0, hs)
    rk4 = convergence_study(preset.system, preset.config(), X0, 10.0, hs, method="rk4")
    elapsed = time.perf_counter() - t0
    ok = (not meta.inconclusive and 1.8 <= meta.order <= 2.2 and not rk4.inconclusive
          and 3.7 <= rk4.order <= 4.3 and elapsed < 30)
    record(6, ok, f"metriplectic slope {meta.order:.3f} (in [1.8, 2.2]), RK4 slope {rk4.order:.3f} "
                  f"(in [3.7, 4.3]), {elapsed:.2f} s (< 30 s)")
    assert ok


def test_criterion_7_second_law_order():
    """Quartic entropy: per-step deficit and its O(h^3) content.

    For this system the deficit max(0, -dS) is zero in exact arithmetic, so
    the literal ratio test is 0/0; it is evaluated as "deficit at the
    round-off floor for every h", and the order-3 statement is checked on
    the remainder dS - h grad S(z).K_d grad S(z), which is what the
    second-law estimate bounds.
    """
    system = rigid_body_system(INERTIA, entropy="quartic")
    p0 = np.array([0.3, -1.0, 0.2])
    hs = [0.2, 0.1, 0.05, 0.025, 0.0125]
    t_end = 20.0
    scheme = DiscreteGradientScheme(Kind.MIDPOINT)
    floor = 1e-15
    deficits, remainders = [], []
    for h in hs:
        traj = integrate(system, IntegratorConfig(step_h=h), p0, round(t_end / h))
        x = traj.states
        ds = traj.delta_entropies[1:]
        deficits.append(float(np.max(np.maximum(0.0, -ds))))
        rem = 0.0
        for a, b, d in zip(x[:-1], x[1:], ds):
            z = 0.5 * (a + b)
            gs = system.entropy.gradient(z)
            dg = discrete_gradient(scheme, system.hamiltonian, a, b)
            kd = build_kd(system.metric, dg, z)
            rem = max(rem, abs(d - h * gs @ kd @ gs))
        remainders.append(rem)
    def_ok = all(
        d2 <= d1 / 6.0 or (d1 <= floor and d2 <= floor) for d1, d2 in zip(deficits, deficits[1:])
    )
    ratios = [r1 / r2 for r1, r2 in zip(remainders, remainders[1:])]
    ok = def_ok and all(r >= 6.0 for r in ratios)
    record(7, ok, f"deficits {['%.1e' % d for d in deficits]} (at floor {floor:.0e} or /6 per halving); "
                  f"O(h^3) remainder ratios {['%.2f' % r for r in ratios]} (>= 6)")
    assert ok


def test_criterion_8_casimir_rate():
    sc, _, h, c = so3_preset(INERTIA)
    rng = np.random.default_rng(8)
    powers = [rng.multinomial(rng.integers(1, 4), np.full(3, 1 / 3)) for _ in range(4)]
    coef = rng.normal(size=(3, 4))
    monos = lambda w: np.array([np.prod(w**p) for p in powers])  # noqa: E731
    force = ForceMap.user(lambda w: coef @ monos(w))
    worst = 0.0
    for mu in sample_states(3, 100, 8):
        lhs = casimir_rate(sc, h, force, c, mu)
        gc = c.gradient(mu)
        rhs_vec = forced_lie_poisson_rhs(sc, h, force, mu)
        rhs = float(gc @ rhs_vec)
        scale = max(np.abs(gc) @ np.abs(rhs_vec), abs(lhs), 1e-300)
        worst = max(worst, abs(lhs - rhs) / scale)
    ok = worst <= 1e-12
    record(8, ok, f"max relative |rate - grad C . rhs| {worst:.2e} (<= 1e-12) over 100 states")
    assert ok


def test_criterion_9_negative_control(preset):
    traj = rk4_integrate(preset.system, H_STEP, X0, 2000)
    rep = audit_trajectory(traj, preset.system)
    d = rep["energy-drift"].max_residual
    ok = not rep["energy-drift"].passed and d > 10 * ENERGY_TOL
    record(9, ok, f"RK4 energy drift {d:.2e} (> {10 * ENERGY_TOL:.0e}); audit verdict "
                  f"{'fail' if not rep.passed else 'pass'} as required")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
