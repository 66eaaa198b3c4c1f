# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled rigid body kernels. Same API and semantics as ``_kernels_py``."""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, fmax, pow, isfinite, INFINITY

cnp.import_array()

cdef int STALL_LIMIT = 5


cdef inline void _discrete_rhs(double i1, double i2, double i3,
                               double z1, double z2, double z3,
                               int q, bint scaled, double* out) noexcept nogil:
    cdef double g1 = z1 / i1
    cdef double g2 = z2 / i2
    cdef double g3 = z3 / i3
    cdef double c = g1 * g1 + g2 * g2 + g3 * g3
    cdef double w = 1.0
    if q != 1:
        w = pow(z1 * z1 + z2 * z2 + z3 * z3, q - 1)
    cdef double s1 = w * z1
    cdef double s2 = w * z2
    cdef double s3 = w * z3
    cdef double gs = g1 * s1 + g2 * s2 + g3 * s3
    cdef double k = c if scaled else 1.0
    out[0] = (z2 * g3 - z3 * g2) + k * (c * s1 - g1 * gs)
    out[1] = (z3 * g1 - z1 * g3) + k * (c * s2 - g2 * gs)
    out[2] = (z1 * g2 - z2 * g1) + k * (c * s3 - g3 * gs)


cdef bint _step(double i1, double i2, double i3, double* p, double h, int q,
                bint scaled, double tol, int max_iters,
                double* x, int* iters, double* resid) noexcept nogil:
    cdef double r[3]
    cdef double n1, n2, n3, res = INFINITY, prev = INFINITY
    cdef int it, stall = 0
    cdef double scale = 1.0 + fmax(fabs(p[0]), fmax(fabs(p[1]), fabs(p[2])))
    _discrete_rhs(i1, i2, i3, p[0], p[1], p[2], q, scaled, r)
    x[0] = p[0] + h * r[0]
    x[1] = p[1] + h * r[1]
    x[2] = p[2] + h * r[2]
    for it in range(1, max_iters + 1):
        _discrete_rhs(i1, i2, i3, 0.5 * (p[0] + x[0]), 0.5 * (p[1] + x[1]), 0.5 * (p[2] + x[2]),
                      q, scaled, r)
        n1 = p[0] + h * r[0]
        n2 = p[1] + h * r[1]
        n3 = p[2] + h * r[2]
        res = fmax(fabs(n1 - x[0]), fmax(fabs(n2 - x[1]), fabs(n3 - x[2]))) / scale
        x[0] = n1
        x[1] = n2
        x[2] = n3
        iters[0] = it
        resid[0] = res
        if res <= tol:
            return True
        if res >= prev:
            stall += 1
        else:
            stall = 0
        if stall >= STALL_LIMIT or not isfinite(res):
            return False
        prev = res
    return False


def rigid_body_step(inertia, p, double h, int q=1, bint scaled=False, double tol=1e-13, int max_iters=200):
    cdef double pp[3]
    cdef double x[3]
    cdef int iters = 0
    cdef double resid = 0.0
    i1, i2, i3 = (float(v) for v in inertia)
    pp[0] = p[0]
    pp[1] = p[1]
    pp[2] = p[2]
    ok = _step(i1, i2, i3, pp, h, q, scaled, tol, max_iters, x, &iters, &resid)
    return np.array([x[0], x[1], x[2]]), iters, resid, bool(ok)


def rigid_body_run(inertia, p0, double h, Py_ssize_t n_steps, int q=1, bint scaled=False,
                   double tol=1e-13, int max_iters=200):
    cdef double i1 = inertia[0], i2 = inertia[1], i3 = inertia[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] states = np.zeros((n_steps + 1, 3))
    cdef cnp.ndarray[cnp.int64_t, ndim=1] iters_out = np.zeros(n_steps, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] resid_out = np.zeros(n_steps)
    cdef double[:, ::1] sv = states
    cdef cnp.int64_t[::1] itv = iters_out
    cdef double[::1] rv = resid_out
    cdef double p[3]
    cdef double x[3]
    cdef int iters = 0
    cdef double resid = 0.0
    cdef Py_ssize_t k
    cdef Py_ssize_t done = n_steps
    p[0] = p0[0]
    p[1] = p0[1]
    p[2] = p0[2]
    sv[0, 0] = p[0]
    sv[0, 1] = p[1]
    sv[0, 2] = p[2]
    with nogil:
        for k in range(n_steps):
            if not _step(i1, i2, i3, p, h, q, scaled, tol, max_iters, x, &iters, &resid):
                done = k
                break
            p[0] = x[0]
            p[1] = x[1]
            p[2] = x[2]
            sv[k + 1, 0] = p[0]
            sv[k + 1, 1] = p[1]
            sv[k + 1, 2] = p[2]
            itv[k] = iters
            rv[k] = resid
    return states, iters_out, resid_out, done


def rigid_body_rhs(inertia, p, int q=1):
    cdef double out[3]
    _discrete_rhs(float(inertia[0]), float(inertia[1]), float(inertia[2]),
                  float(p[0]), float(p[1]), float(p[2]), q, False, out)
    return np.array([out[0], out[1], out[2]])


def rk4_rigid_body_run(inertia, p0, double h, Py_ssize_t n_steps, int q=1):
    cdef double i1 = inertia[0], i2 = inertia[1], i3 = inertia[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] states = np.zeros((n_steps + 1, 3))
    cdef double[:, ::1] sv = states
    cdef double a[3]
    cdef double b[3]
    cdef double c[3]
    cdef double d[3]
    cdef double p1 = p0[0], p2 = p0[1], p3 = p0[2]
    cdef Py_ssize_t k
    sv[0, 0] = p1
    sv[0, 1] = p2
    sv[0, 2] = p3
    with nogil:
        for k in range(n_steps):
            _discrete_rhs(i1, i2, i3, p1, p2, p3, q, False, a)
            _discrete_rhs(i1, i2, i3, p1 + 0.5 * h * a[0], p2 + 0.5 * h * a[1], p3 + 0.5 * h * a[2], q, False, b)
            _discrete_rhs(i1, i2, i3, p1 + 0.5 * h * b[0], p2 + 0.5 * h * b[1], p3 + 0.5 * h * b[2], q, False, c)
            _discrete_rhs(i1, i2, i3, p1 + h * c[0], p2 + h * c[1], p3 + h * c[2], q, False, d)
            p1 += h / 6.0 * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0])
            p2 += h / 6.0 * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1])
            p3 += h / 6.0 * (a[2] + 2.0 * b[2] + 2.0 * c[2] + d[2])
            sv[k + 1, 0] = p1
            sv[k + 1, 1] = p2
            sv[k + 1, 2] = p3
    return states
