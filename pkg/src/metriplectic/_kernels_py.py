"""Pure-Python rigid body kernels; fallback for the compiled ``_kernels``.

Both modules expose the same functions with the same semantics. The
relaxed rigid body uses the so(3) Lie-Poisson tensor, the Euclidean metric,
``H = sum p_i^2 / (2 I_i)`` and ``S = |p|^(2q) / (2q)``. For this diagonal
quadratic energy every discrete gradient reduces to ``z / I``.
"""
import math

import numpy as np

STALL_LIMIT = 5


def _discrete_rhs(i1, i2, i3, z1, z2, z3, q, scaled):
    g1 = z1 / i1
    g2 = z2 / i2
    g3 = z3 / i3
    c = g1 * g1 + g2 * g2 + g3 * g3
    if q == 1:
        w = 1.0
    else:
        w = (z1 * z1 + z2 * z2 + z3 * z3) ** (q - 1)
    s1 = w * z1
    s2 = w * z2
    s3 = w * z3
    gs = g1 * s1 + g2 * s2 + g3 * s3
    k = c if scaled else 1.0
    return (
        (z2 * g3 - z3 * g2) + k * (c * s1 - g1 * gs),
        (z3 * g1 - z1 * g3) + k * (c * s2 - g2 * gs),
        (z1 * g2 - z2 * g1) + k * (c * s3 - g3 * gs),
    )


def _step(i1, i2, i3, p1, p2, p3, h, q, scaled, tol, max_iters):
    scale = 1.0 + max(abs(p1), abs(p2), abs(p3))
    r1, r2, r3 = _discrete_rhs(i1, i2, i3, p1, p2, p3, q, scaled)
    x1 = p1 + h * r1
    x2 = p2 + h * r2
    x3 = p3 + h * r3
    prev = math.inf
    stall = 0
    for it in range(1, max_iters + 1):
        r1, r2, r3 = _discrete_rhs(i1, i2, i3, 0.5 * (p1 + x1), 0.5 * (p2 + x2), 0.5 * (p3 + x3), q, scaled)
        n1 = p1 + h * r1
        n2 = p2 + h * r2
        n3 = p3 + h * r3
        res = max(abs(n1 - x1), abs(n2 - x2), abs(n3 - x3)) / scale
        x1, x2, x3 = n1, n2, n3
        if res <= tol:
            return x1, x2, x3, it, res, True
        stall = stall + 1 if res >= prev else 0
        if stall >= STALL_LIMIT or not math.isfinite(res):
            return x1, x2, x3, it, res, False
        prev = res
    return x1, x2, x3, max_iters, res, False


def rigid_body_step(inertia, p, h, q=1, scaled=False, tol=1e-13, max_iters=200):
    """One fixed-point solve of the metriplectic midpoint step.

    Returns ``(p_next, iterations, residual, converged)``.
    """
    i1, i2, i3 = (float(v) for v in inertia)
    x1, x2, x3, it, res, ok = _step(i1, i2, i3, float(p[0]), float(p[1]), float(p[2]),
                                    float(h), int(q), bool(scaled), float(tol), int(max_iters))
    return np.array([x1, x2, x3]), it, res, ok


def rigid_body_run(inertia, p0, h, n_steps, q=1, scaled=False, tol=1e-13, max_iters=200):
    """Iterate :func:`rigid_body_step` until ``n_steps`` or the first failure.

    Returns ``(states, iterations, residuals, n_done)``; ``states`` has
    ``n_done + 1`` meaningful rows, the rest are zero.
    """
    i1, i2, i3 = (float(v) for v in inertia)
    states = np.zeros((n_steps + 1, 3))
    iters = np.zeros(n_steps, dtype=np.int64)
    resid = np.zeros(n_steps)
    p1, p2, p3 = float(p0[0]), float(p0[1]), float(p0[2])
    states[0] = (p1, p2, p3)
    h = float(h)
    q = int(q)
    scaled = bool(scaled)
    for k in range(n_steps):
        x1, x2, x3, it, res, ok = _step(i1, i2, i3, p1, p2, p3, h, q, scaled, tol, max_iters)
        if not ok:
            return states, iters, resid, k
        p1, p2, p3 = x1, x2, x3
        states[k + 1] = (p1, p2, p3)
        iters[k] = it
        resid[k] = res
    return states, iters, resid, n_steps


def rigid_body_rhs(inertia, p, q=1):
    """Continuous vector field ``Pi grad H + K grad S``."""
    i1, i2, i3 = (float(v) for v in inertia)
    return np.array(_discrete_rhs(i1, i2, i3, float(p[0]), float(p[1]), float(p[2]), int(q), False))


def rk4_rigid_body_run(inertia, p0, h, n_steps, q=1):
    """Classical RK4 on the continuous relaxed rigid body field."""
    i1, i2, i3 = (float(v) for v in inertia)
    states = np.zeros((n_steps + 1, 3))
    p1, p2, p3 = float(p0[0]), float(p0[1]), float(p0[2])
    states[0] = (p1, p2, p3)
    h = float(h)
    q = int(q)
    f = _discrete_rhs
    for k in range(n_steps):
        a1, a2, a3 = f(i1, i2, i3, p1, p2, p3, q, False)
        b1, b2, b3 = f(i1, i2, i3, p1 + 0.5 * h * a1, p2 + 0.5 * h * a2, p3 + 0.5 * h * a3, q, False)
        c1, c2, c3 = f(i1, i2, i3, p1 + 0.5 * h * b1, p2 + 0.5 * h * b2, p3 + 0.5 * h * b3, q, False)
        d1, d2, d3 = f(i1, i2, i3, p1 + h * c1, p2 + h * c2, p3 + h * c3, q, False)
        p1 += h / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        p2 += h / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
        p3 += h / 6.0 * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
        states[k + 1] = (p1, p2, p3)
    return states
