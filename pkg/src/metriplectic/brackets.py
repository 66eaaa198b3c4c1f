"""Poisson and symmetric (metric) brackets as state-dependent matrix fields.

A Poisson structure is stored as a skew matrix field ``Pi(x)`` and a
dissipative structure as a symmetric positive-semidefinite field ``K(x)``.
Brackets of functions are contractions of their gradients with these
matrices::

    {f, g}(x) = grad f(x) . Pi(x) grad g(x)
    (f, g)(x) = grad f(x) . K(x)  grad g(x)
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError

_EPS = np.finfo(float).eps
_FD_BASE = _EPS ** (1.0 / 3.0)

#: Relative singular-value cutoff for the Gram pseudo-inverse.
GRAM_RCOND = 1e-12


def as_state(x, n=None) -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float array, optionally of length ``n``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigurationError(f"state must be a non-empty vector, got shape {arr.shape}")
    if n is not None and arr.size != n:
        raise ConfigurationError(f"dimension mismatch: expected {n}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError("state contains non-finite entries")
    return arr


def fd_step(x: np.ndarray) -> float:
    """Default central-difference step, ``cbrt(eps) * (1 + |x|)``."""
    return _FD_BASE * (1.0 + np.linalg.norm(x))


def fd_gradient(fun: Callable[[np.ndarray], float], x, step: Optional[float] = None) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    h = fd_step(x) if step is None else step
    g = np.empty_like(x)
    e = np.zeros_like(x)
    for i in range(x.size):
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * h)
        e[i] = 0.0
    return g


@dataclass(frozen=True)
class ScalarField:
    """A real function of the state with an optional analytic gradient.

    Without ``grad`` the gradient falls back to central differences.
    """

    value: Callable[[np.ndarray], float]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def __call__(self, x) -> float:
        return float(self.value(np.asarray(x, dtype=float)))

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad is None:
            return fd_gradient(self.value, x)
        return np.asarray(self.grad(x), dtype=float)

    def gradient_mismatch(self, samples) -> float:
        """Largest relative gap between analytic and finite-difference gradients."""
        worst = 0.0
        for x in samples:
            x = np.asarray(x, dtype=float)
            ga = self.gradient(x)
            gf = fd_gradient(self.value, x)
            scale = max(np.linalg.norm(ga), np.linalg.norm(gf), 1.0)
            worst = max(worst, np.linalg.norm(ga - gf) / scale)
        return worst

    @classmethod
    def constant(cls, c: float = 0.0) -> "ScalarField":
        return cls(lambda x: c, lambda x: np.zeros_like(x), name="constant")

    @classmethod
    def coordinate(cls, i: int) -> "ScalarField":
        def grad(x):
            g = np.zeros_like(x)
            g[i] = 1.0
            return g

        return cls(lambda x: x[i], grad, name=f"x_{i + 1}")

    @classmethod
    def quadratic(cls, a) -> "ScalarField":
        """``f(x) = x.A x / 2`` for a symmetric matrix ``A``."""
        a = np.asarray(a, dtype=float)
        a = 0.5 * (a + a.T)
        return cls(lambda x: 0.5 * x @ a @ x, lambda x: a @ x, name="quadratic")

    @classmethod
    def polynomial(cls, coeffs, powers) -> "ScalarField":
        """``sum_t coeffs[t] * prod_i x_i ** powers[t][i]`` with exact gradient."""
        c = np.asarray(coeffs, dtype=float)
        p = np.asarray(powers, dtype=int)
        if p.ndim != 2 or p.shape[0] != c.size or np.any(p < 0):
            raise ConfigurationError("polynomial needs one nonnegative power vector per coefficient")
        n = p.shape[1]
        lowered = []
        for i in range(n):
            q = p.copy()
            q[:, i] = np.maximum(q[:, i] - 1, 0)
            lowered.append((c * p[:, i], q))

        def value(x):
            return float(c @ np.prod(x ** p, axis=1))

        def grad(x):
            return np.array([ci @ np.prod(x ** qi, axis=1) for ci, qi in lowered])

        return cls(value, grad, name="polynomial")


class Symmetry(enum.Enum):
    SKEW = "skew"
    PSD = "psd"


@dataclass(frozen=True)
class TensorField:
    """State-dependent ``n x n`` matrix with a declared symmetry class.

    Evaluation projects onto the declared class (skew or symmetric part) so
    the stored symmetry holds exactly; definiteness is only checked.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    symmetry: Symmetry
    name: str = ""

    def __call__(self, x) -> np.ndarray:
        m = np.asarray(self.eval(np.asarray(x, dtype=float)), dtype=float)
        if self.symmetry is Symmetry.SKEW:
            return 0.5 * (m - m.T)
        return 0.5 * (m + m.T)

    def raw(self, x) -> np.ndarray:
        """Evaluate without symmetry projection."""
        return np.asarray(self.eval(np.asarray(x, dtype=float)), dtype=float)

    def symmetry_residual(self, samples) -> float:
        """Largest violation of the declared class, relative to ``|M|``.

        For skew fields this is ``|M + M^T| / |M|``; for PSD fields it is the
        larger of the asymmetry and the most negative eigenvalue.
        """
        worst = 0.0
        for x in samples:
            m = self.raw(x)
            scale = max(np.linalg.norm(m), np.finfo(float).tiny)
            if self.symmetry is Symmetry.SKEW:
                worst = max(worst, np.max(np.abs(m + m.T)) / scale)
            else:
                asym = np.max(np.abs(m - m.T)) / scale
                lam = np.linalg.eigvalsh(0.5 * (m + m.T))[0]
                worst = max(worst, asym, -lam / scale)
        return worst

    @classmethod
    def constant(cls, m, symmetry: Symmetry) -> "TensorField":
        m = np.array(m, dtype=float)
        return cls(lambda x: m, symmetry, name="constant")

    @classmethod
    def zero(cls, n: int, symmetry: Symmetry) -> "TensorField":
        return cls.constant(np.zeros((n, n)), symmetry)


@dataclass(frozen=True)
class MetricField:
    """Cometric (inverse metric) ``g^{ij}(x)``, symmetric positive definite."""

    g_inv: Callable[[np.ndarray], np.ndarray]
    name: str = ""

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.g_inv(np.asarray(x, dtype=float)), dtype=float)

    def min_eigenvalue(self, samples) -> float:
        return min(np.linalg.eigvalsh(self(x))[0] for x in samples)

    @classmethod
    def euclidean(cls, n: int) -> "MetricField":
        eye = np.eye(n)
        return cls(lambda x: eye, name="euclidean")

    @classmethod
    def constant(cls, g_inv) -> "MetricField":
        g_inv = np.array(g_inv, dtype=float)
        if g_inv.ndim != 2 or g_inv.shape[0] != g_inv.shape[1]:
            raise ConfigurationError("cometric must be a square matrix")
        if not np.allclose(g_inv, g_inv.T, rtol=0, atol=1e-14 * np.abs(g_inv).max()):
            raise ConfigurationError("cometric must be symmetric")
        if np.linalg.eigvalsh(g_inv)[0] <= 0:
            raise ConfigurationError("cometric must be positive definite")
        return cls(lambda x: g_inv, name="constant")


@dataclass(frozen=True)
class MetriplecticSystem:
    """Poisson tensor, dissipative tensor, energy and entropy.

    ``metric`` is the cometric used to build the discrete dissipative
    tensor in the integrator; ``preset`` optionally tags systems that have a
    compiled fast path (see :mod:`metriplectic.kernels`).
    """

    pi: TensorField
    kappa: TensorField
    hamiltonian: ScalarField
    entropy: ScalarField
    metric: Optional[MetricField] = None
    preset: Optional[object] = field(default=None, compare=False)

    def vector_field(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.pi(x) @ self.hamiltonian.gradient(x) + self.kappa(x) @ self.entropy.gradient(x)

    def kernel_residual(self, samples) -> float:
        """max |K grad H| / (|K| |grad H|) over samples."""
        worst = 0.0
        for x in samples:
            k = self.kappa(x)
            gh = self.hamiltonian.gradient(x)
            scale = np.linalg.norm(k) * np.linalg.norm(gh)
            if scale > 0:
                worst = max(worst, np.linalg.norm(k @ gh) / scale)
        return worst

    def casimir_residual(self, samples) -> float:
        return check_casimir(self.pi, self.entropy, samples)

    def is_valid(self, samples, tol: float = 1e-12) -> bool:
        return self.kernel_residual(samples) <= tol and self.casimir_residual(samples) <= tol


def _grads(f: ScalarField, g: ScalarField, x, n):
    gf = f.gradient(x)
    gg = g.gradient(x)
    if gf.size != n or gg.size != n:
        raise ConfigurationError(f"gradient dimension mismatch: {gf.size}, {gg.size} vs {n}")
    return gf, gg


def evaluate_poisson_bracket(pi: TensorField, f: ScalarField, g: ScalarField, x) -> float:
    """``{f, g}(x) = grad f . Pi(x) grad g``."""
    x = as_state(x)
    m = pi(x)
    if m.shape != (x.size, x.size):
        raise ConfigurationError(f"tensor shape {m.shape} does not match state dimension {x.size}")
    gf, gg = _grads(f, g, x, x.size)
    return float(gf @ m @ gg)


def evaluate_symmetric_bracket(kappa: TensorField, f: ScalarField, g: ScalarField, x) -> float:
    """``(f, g)(x) = grad f . K(x) grad g``; nonnegative when ``f == g``."""
    x = as_state(x)
    m = kappa(x)
    if m.shape != (x.size, x.size):
        raise ConfigurationError(f"tensor shape {m.shape} does not match state dimension {x.size}")
    gf, gg = _grads(f, g, x, x.size)
    return float(gf @ m @ gg)


def hamiltonian_vector_field(pi: TensorField, h: ScalarField, x) -> np.ndarray:
    x = as_state(x)
    m = pi(x)
    gh = h.gradient(x)
    if m.shape != (x.size, x.size) or gh.size != x.size:
        raise ConfigurationError("dimension mismatch between tensor, gradient and state")
    return m @ gh


def psd_from_covector(g_inv: np.ndarray, dh: np.ndarray) -> np.ndarray:
    """``C G^-1 - (G^-1 dh)(G^-1 dh)^T`` with ``C = dh . G^-1 dh``.

    Symmetric PSD with ``dh`` in its kernel; zero when ``dh == 0``.
    """
    if dh.size == 1:
        # the orthogonal complement of a line in 1-D is trivial
        return np.zeros((1, 1))
    v = g_inv @ dh
    c = dh @ v
    k = c * g_inv - np.outer(v, v)
    return 0.5 * (k + k.T)


def build_psd_from_metric(metric: MetricField, h: ScalarField) -> TensorField:
    """Dissipative tensor with ``grad H`` in its kernel, built from a metric.

    ``K(x) = C_H G^-1 - (G^-1 grad H)(G^-1 grad H)^T`` with
    ``C_H = grad H . G^-1 grad H``. Note there is no ``1 / C_H`` prefactor;
    :func:`build_psd_multi_constraint` with ``[h]`` equals this divided by
    ``C_H``.
    """

    def k(x):
        return psd_from_covector(metric(x), h.gradient(x))

    return TensorField(k, Symmetry.PSD, name="psd-from-metric")


def build_psd_multi_constraint(metric: MetricField, constraints: Sequence[ScalarField]) -> TensorField:
    """PSD tensor annihilating the differential of every constraint.

    ``K = P^T G^-1 P`` with ``P = I - L^T C^+ L G^-1``, where the rows of
    ``L`` are the constraint gradients and ``C^+`` is the pseudo-inverse of
    their Gram matrix ``L G^-1 L^T``.
    """
    constraints = list(constraints)
    if not constraints:
        raise ConfigurationError("at least one constraint is required")

    def k(x):
        g_inv = metric(x)
        lmat = np.array([c.gradient(x) for c in constraints])
        gram = lmat @ g_inv @ lmat.T
        if not np.any(gram):
            return g_inv.copy()
        cplus = np.linalg.pinv(gram, rcond=GRAM_RCOND, hermitian=True)
        proj = np.eye(g_inv.shape[0]) - lmat.T @ cplus @ lmat @ g_inv
        out = proj.T @ g_inv @ proj
        return 0.5 * (out + out.T)

    return TensorField(k, Symmetry.PSD, name="psd-multi-constraint")


def check_jacobi(pi: TensorField, samples, h_fd: Optional[float] = None) -> float:
    """Max absolute cyclic Jacobi residual, derivatives by central differences.

    Evaluates ``sum_l Pi^{il} d_l Pi^{jk} + Pi^{kl} d_l Pi^{ij} + Pi^{jl} d_l Pi^{ki}``
    over all index triples.
    """
    worst = 0.0
    for x in samples:
        x = np.asarray(x, dtype=float)
        n = x.size
        step = fd_step(x) if h_fd is None else h_fd
        m = pi(x)
        dm = np.empty((n, n, n))
        e = np.zeros(n)
        for l in range(n):
            e[l] = step
            dm[l] = (pi(x + e) - pi(x - e)) / (2.0 * step)
            e[l] = 0.0
        # t[i, j, k] = sum_l Pi[i, l] dPi[l][j, k]
        t = np.einsum("il,ljk->ijk", m, dm)
        res = t + t.transpose(1, 2, 0) + t.transpose(2, 0, 1)
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


def check_casimir(pi: TensorField, c: ScalarField, samples) -> float:
    """max |Pi grad C| / (1 + |Pi| |grad C|) over samples."""
    worst = 0.0
    for x in samples:
        m = pi(x)
        gc = c.gradient(x)
        worst = max(worst, np.linalg.norm(m @ gc) / (1.0 + np.linalg.norm(m) * np.linalg.norm(gc)))
    return float(worst)


def skew_rank(m: np.ndarray, rcond: float = 1e-10) -> int:
    """Numerical rank with cutoff ``rcond * sigma_max``."""
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rcond * s[0]))
