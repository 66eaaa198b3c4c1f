import os
import subprocess
import sys

import numpy as np
import pytest

from metriplectic import DiscreteGradientScheme, IntegratorConfig, integrate, kernels, rk4_integrate
from metriplectic import _kernels_py
from metriplectic.dgrad import Kind

from conftest import FIG_INERTIA, FIG_X0

try:
    from metriplectic import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

needs_c = pytest.mark.skipif(_kernels_c is None, reason="compiled extension not built")


@pytest.mark.parametrize("q", [1, 2])
@pytest.mark.parametrize("scaled", [False, True])
def test_python_kernel_matches_generic(relaxed_body, quartic_body, q, scaled):
    system = relaxed_body if q == 1 else quartic_body
    variant = "scaled" if scaled else "unscaled"
    generic = integrate(system, IntegratorConfig(step_h=0.1, kd_variant=variant, use_kernel=False), FIG_X0, 200)
    states, iters, resid, done = _kernels_py.rigid_body_run(FIG_INERTIA, FIG_X0, 0.1, 200, q, scaled)
    assert done == 200
    np.testing.assert_allclose(states, generic.states, rtol=0, atol=1e-13)
    assert np.all(resid <= 1e-13)


@needs_c
@pytest.mark.parametrize("q", [1, 2])
@pytest.mark.parametrize("scaled", [False, True])
def test_compiled_matches_python(q, scaled):
    a = _kernels_c.rigid_body_run(FIG_INERTIA, FIG_X0, 0.1, 500, q, scaled)
    b = _kernels_py.rigid_body_run(FIG_INERTIA, FIG_X0, 0.1, 500, q, scaled)
    assert a[3] == b[3] == 500
    np.testing.assert_allclose(a[0], b[0], rtol=0, atol=1e-14)
    np.testing.assert_array_equal(a[1], b[1])


@needs_c
def test_compiled_rhs_and_rk4(rng):
    for p in rng.normal(size=(10, 3)):
        np.testing.assert_allclose(_kernels_c.rigid_body_rhs(FIG_INERTIA, p, 2),
                                   _kernels_py.rigid_body_rhs(FIG_INERTIA, p, 2), atol=1e-15)
    np.testing.assert_allclose(_kernels_c.rk4_rigid_body_run(FIG_INERTIA, FIG_X0, 0.1, 100, 1),
                               _kernels_py.rk4_rigid_body_run(FIG_INERTIA, FIG_X0, 0.1, 100, 1), atol=1e-14)


def test_rhs_is_continuous_field(relaxed_body, quartic_body, rng):
    for p in rng.normal(size=(10, 3)):
        np.testing.assert_allclose(kernels.rigid_body_rhs(FIG_INERTIA, p, 1), relaxed_body.vector_field(p), atol=1e-14)
        np.testing.assert_allclose(kernels.rigid_body_rhs(FIG_INERTIA, p, 2), quartic_body.vector_field(p), atol=1e-14)


def test_rk4_fast_path_matches_generic(relaxed_body):
    a = rk4_integrate(relaxed_body, 0.1, FIG_X0, 300).states
    b = rk4_integrate(relaxed_body, 0.1, FIG_X0, 300, use_kernel=False).states
    np.testing.assert_allclose(a, b, atol=1e-14)


@pytest.mark.parametrize("kind", list(Kind), ids=lambda k: k.value)
def test_fast_path_every_scheme(relaxed_body, kind):
    cfg = IntegratorConfig(step_h=0.1, scheme=DiscreteGradientScheme(kind))
    fast = integrate(relaxed_body, cfg, FIG_X0, 50).states
    slow = integrate(relaxed_body, IntegratorConfig(step_h=0.1, scheme=DiscreteGradientScheme(kind),
                                                    use_kernel=False), FIG_X0, 50).states
    np.testing.assert_allclose(fast, slow, atol=1e-13)


def test_kernel_failure_falls_back_to_generic(relaxed_body):
    # one fixed-point iteration per step cannot converge; the generic solver takes over
    cfg = IntegratorConfig(step_h=0.1, max_iters=1)
    ref = integrate(relaxed_body, IntegratorConfig(step_h=0.1, max_iters=1, use_kernel=False), FIG_X0, 5)
    traj = integrate(relaxed_body, cfg, FIG_X0, 5)
    np.testing.assert_allclose(traj.states, ref.states, atol=1e-13)


def test_kernel_step_reports_failure():
    p, it, res, ok = kernels.rigid_body_step(FIG_INERTIA, FIG_X0, 0.1, max_iters=1)
    assert not ok and it == 1 and res > 1e-13


def test_env_var_forces_fallback():
    env = dict(os.environ, METRIPLECTIC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import metriplectic; print(metriplectic.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_c
def test_default_backend_is_compiled():
    if os.environ.get("METRIPLECTIC_PURE_PYTHON", "") not in ("", "0"):
        pytest.skip("fallback forced by environment")
    assert kernels.BACKEND == "cython"
