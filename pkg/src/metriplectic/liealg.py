"""Finite-dimensional Lie algebras, Lie-Poisson tensors and forced dynamics.

Structure constants are stored as ``c[a, b, d] = C^d_{ab}``, so that
``[e_a, e_b] = C^d_{ab} e_d``. Dual vectors (momenta) live in the same
coordinate space, paired by the Euclidean dot product.

The Lie-Poisson tensor uses the sign ``Pi_{ij}(mu) = -C^d_{ij} mu_d``,
which makes ``Pi(mu) grad H = ad*_{grad H} mu`` and reproduces the usual
rigid body equations for ``H(p) = sum p_i^2 / (2 I_i)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .brackets import MetricField, MetriplecticSystem, ScalarField, Symmetry, TensorField, build_psd_from_metric
from .errors import ConfigurationError

JACOBI_TOL = 1e-12


class StructureConstants:
    """Structure constants of a Lie algebra, checked at construction."""

    def __init__(self, c):
        c = np.array(c, dtype=float)
        if c.ndim != 3 or not (c.shape[0] == c.shape[1] == c.shape[2]) or c.shape[0] == 0:
            raise ConfigurationError(f"structure constants must have shape (n, n, n), got {c.shape}")
        scale = max(1.0, float(np.max(np.abs(c))))
        if np.max(np.abs(c + c.transpose(1, 0, 2))) > JACOBI_TOL * scale:
            raise ConfigurationError("structure constants are not antisymmetric in the lower indices")
        if jacobi_residual(c) > JACOBI_TOL * scale**2:
            raise ConfigurationError("structure constants violate the Jacobi identity")
        c.setflags(write=False)
        self.c = c

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    @classmethod
    def so3(cls) -> "StructureConstants":
        eps = np.zeros((3, 3, 3))
        for a, b, d in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            eps[a, b, d] = 1.0
            eps[b, a, d] = -1.0
        return cls(eps)

    @classmethod
    def abelian(cls, n: int) -> "StructureConstants":
        return cls(np.zeros((n, n, n)))

    def __repr__(self):
        return f"StructureConstants(dim={self.dim})"


def jacobi_residual(c: np.ndarray) -> float:
    """max |sum_e C^e_{ab} C^f_{ec} + cyclic(a, b, c)|."""
    t = np.einsum("abe,ecf->abcf", c, c)
    res = t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)
    return float(np.max(np.abs(res))) if res.size else 0.0


@dataclass(frozen=True)
class AlgebraInnerProduct:
    """Constant symmetric positive-semidefinite form on the algebra."""

    kg: np.ndarray

    def __post_init__(self):
        kg = np.array(self.kg, dtype=float)
        if kg.ndim != 2 or kg.shape[0] != kg.shape[1]:
            raise ConfigurationError("inner product must be a square matrix")
        scale = float(np.max(np.abs(kg))) if kg.size else 0.0
        if np.max(np.abs(kg - kg.T), initial=0.0) > 1e-14 * max(scale, 1.0):
            raise ConfigurationError("inner product must be symmetric")
        if scale > 0 and np.linalg.eigvalsh(kg)[0] < -1e-12 * np.linalg.norm(kg):
            raise ConfigurationError("inner product must be positive semidefinite")
        object.__setattr__(self, "kg", kg)

    @classmethod
    def identity(cls, n: int) -> "AlgebraInnerProduct":
        return cls(np.eye(n))


def _kg_matrix(kg) -> np.ndarray:
    return kg.kg if isinstance(kg, AlgebraInnerProduct) else AlgebraInnerProduct(kg).kg


@dataclass(frozen=True)
class QuadraticLagrangian:
    """``l(xi) = xi . M xi / 2`` with ``M`` symmetric positive definite."""

    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=float)
        if m.ndim == 1:
            m = np.diag(m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigurationError("inertia operator must be a square matrix")
        if not np.allclose(m, m.T, rtol=0, atol=1e-14 * np.abs(m).max()):
            raise ConfigurationError("inertia operator must be symmetric")
        if np.linalg.eigvalsh(m)[0] <= 0:
            raise ConfigurationError("inertia operator must be positive definite")
        object.__setattr__(self, "m", m)

    def __call__(self, xi) -> float:
        xi = np.asarray(xi, dtype=float)
        return 0.5 * float(xi @ self.m @ xi)

    def momentum(self, xi) -> np.ndarray:
        return self.m @ np.asarray(xi, dtype=float)

    def velocity(self, mu) -> np.ndarray:
        return np.linalg.solve(self.m, np.asarray(mu, dtype=float))

    def hamiltonian(self) -> ScalarField:
        """Legendre transform ``H(mu) = mu . M^-1 mu / 2``."""
        m_inv = np.linalg.inv(self.m)
        m_inv = 0.5 * (m_inv + m_inv.T)
        return ScalarField(lambda mu: 0.5 * mu @ m_inv @ mu, lambda mu: m_inv @ mu, name="kinetic-energy")


@dataclass(frozen=True)
class ForceMap:
    """Force ``F(xi, mu)`` with values in the dual of the algebra.

    ``mu`` is only used by forces built from a Casimir; user-supplied forces
    receive it and may ignore it.
    """

    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    provenance: str = "user"

    def __call__(self, xi, mu=None) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        mu = None if mu is None else np.asarray(mu, dtype=float)
        return np.asarray(self.eval(xi, mu), dtype=float)

    @classmethod
    def user(cls, fun: Callable[[np.ndarray], np.ndarray]) -> "ForceMap":
        """Wrap a function of the velocity alone."""
        return cls(lambda xi, mu: fun(xi), provenance="user")

    @classmethod
    def zero(cls) -> "ForceMap":
        return cls(lambda xi, mu: np.zeros_like(xi), provenance="zero")


def _check_dim(sc: StructureConstants, *vecs):
    for v in vecs:
        if v.shape != (sc.dim,):
            raise ConfigurationError(f"dimension mismatch: expected ({sc.dim},), got {v.shape}")


def bracket(sc: StructureConstants, xi, eta) -> np.ndarray:
    """Lie bracket ``[xi, eta]^d = C^d_{ab} xi^a eta^b``."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    _check_dim(sc, xi, eta)
    return np.einsum("abd,a,b->d", sc.c, xi, eta)


def coadjoint(sc: StructureConstants, xi, alpha) -> np.ndarray:
    """``(ad*_xi alpha)_b = C^d_{ab} xi^a alpha_d``."""
    xi = np.asarray(xi, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    _check_dim(sc, xi, alpha)
    return np.einsum("abd,a,d->b", sc.c, xi, alpha)


def lie_poisson_tensor(sc: StructureConstants) -> TensorField:
    c = sc.c

    def pi(mu):
        _check_dim(sc, mu)
        return -np.einsum("ijd,d->ij", c, mu)

    return TensorField(pi, Symmetry.SKEW, name="lie-poisson")


def forced_ep_rhs(lag: QuadraticLagrangian, sc: StructureConstants, f: ForceMap, xi) -> np.ndarray:
    """Time derivative of the momentum ``M xi`` under the forced Euler-Poincare equations."""
    xi = np.asarray(xi, dtype=float)
    mu = lag.momentum(xi)
    return coadjoint(sc, xi, mu + f(xi, mu))


def forced_lie_poisson_rhs(sc: StructureConstants, h: ScalarField, f: ForceMap, mu) -> np.ndarray:
    """``mu_dot = ad*_{grad H}(mu + F(grad H, mu))``."""
    mu = np.asarray(mu, dtype=float)
    xi = h.gradient(mu)
    return coadjoint(sc, xi, mu + f(xi, mu))


def force_from_casimir(sc: StructureConstants, kg, casimir: ScalarField) -> ForceMap:
    """Entropy-producing force ``F(xi, mu) = kg [xi, grad C(mu)]``.

    Along the forced Lie-Poisson flow this gives
    ``dC/dt = kg([grad H, grad C], [grad H, grad C]) >= 0``.
    """
    kgm = _kg_matrix(kg)

    def force(xi, mu):
        if mu is None:
            raise ConfigurationError("a Casimir-derived force needs the momentum mu")
        return kgm @ bracket(sc, xi, casimir.gradient(mu))

    return ForceMap(force, provenance="casimir")


def casimir_rate(sc: StructureConstants, h: ScalarField, f: ForceMap, c: ScalarField, mu) -> float:
    """``dC/dt = <F(grad H), [grad H, grad C]>`` along the forced Lie-Poisson flow."""
    mu = np.asarray(mu, dtype=float)
    xi = h.gradient(mu)
    return float(f(xi, mu) @ bracket(sc, xi, c.gradient(mu)))


def _ad_matrix(sc: StructureConstants, xi: np.ndarray) -> np.ndarray:
    # column a holds [xi, e_a]
    return np.einsum("ead,e->da", sc.c, xi)


def induced_symmetric_tensor(sc: StructureConstants, kg, h: ScalarField) -> TensorField:
    """Symmetric tensor ``B^T kg B`` with ``B e_a = [grad H(mu), e_a]``.

    Its product with ``grad C`` equals the force term of the forced
    Lie-Poisson equations when the force comes from :func:`force_from_casimir`.
    """
    kgm = _kg_matrix(kg)

    def k(mu):
        b = _ad_matrix(sc, h.gradient(mu))
        return b.T @ kgm @ b

    return TensorField(k, Symmetry.PSD, name="induced")


def so3_preset(inertia):
    """Rigid body data: so(3) constants, Lagrangian, energy and ``|p|^2 / 2``."""
    inertia = np.array(inertia, dtype=float)
    if inertia.shape != (3,) or np.any(inertia <= 0) or not np.all(np.isfinite(inertia)):
        raise ConfigurationError(f"inertia must be three positive numbers, got {inertia.tolist()}")
    sc = StructureConstants.so3()
    lag = QuadraticLagrangian(np.diag(inertia))
    inv = 1.0 / inertia
    h = ScalarField(lambda p: 0.5 * float(np.sum(inv * p * p)), lambda p: inv * p, name="rigid-body-energy")
    s = norm_power_field(1)
    return sc, lag, h, s


def norm_power_field(q: int) -> ScalarField:
    """``|p|^(2q) / (2q)``; a Casimir of any so(3) Lie-Poisson tensor."""
    if q == 1:
        return ScalarField(lambda p: 0.5 * float(p @ p), lambda p: np.array(p, dtype=float), name="norm-squared")
    return ScalarField(
        lambda p: float(p @ p) ** q / (2 * q),
        lambda p: float(p @ p) ** (q - 1) * np.asarray(p, dtype=float),
        name=f"norm-power-{q}",
    )


@dataclass(frozen=True)
class RigidBodyPreset:
    """Tag for the relaxed rigid body with Euclidean metric.

    ``entropy_power`` is ``q`` in ``S = |p|^(2q) / (2q)``.
    """

    inertia: tuple
    entropy_power: int = 1


def rigid_body_system(inertia, entropy: Union[str, ScalarField] = "quadratic",
                      metric: Optional[MetricField] = None) -> MetriplecticSystem:
    """Relaxed rigid body as a metriplectic system on so(3)*.

    ``entropy`` is ``"quadratic"`` (``|p|^2/2``), ``"quartic"``
    (``|p|^4/4``) or any scalar field.
    """
    sc, _, h, _ = so3_preset(inertia)
    q = None
    if isinstance(entropy, str):
        q = {"quadratic": 1, "quartic": 2}.get(entropy)
        if q is None:
            raise ConfigurationError(f"unknown entropy {entropy!r}")
        s = norm_power_field(q)
    else:
        s = entropy
    euclid = metric is None
    metric = MetricField.euclidean(3) if metric is None else metric
    preset = RigidBodyPreset(tuple(float(i) for i in inertia), q) if (euclid and q is not None) else None
    return MetriplecticSystem(
        pi=lie_poisson_tensor(sc),
        kappa=build_psd_from_metric(metric, h),
        hamiltonian=h,
        entropy=s,
        metric=metric,
        preset=preset,
    )
