"""Discrete gradients.

A discrete gradient of ``H`` is a two-point map ``dg(x, x')`` with

* ``dg(x, x') . (x' - x) = H(x') - H(x)``   (directional identity)
* ``dg(x, x) = grad H(x)``                  (consistency)

Three classical choices are provided: the mean value (averaged vector
field) gradient, the midpoint (Gonzalez) gradient and the coordinate
increment (Itoh-Abe) gradient.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .brackets import ScalarField
from .errors import ConfigurationError

_EPS = np.finfo(float).eps
# Gonzalez correction numerators below this many ulps of the operands are
# pure cancellation noise and are dropped.
_NOISE_ULPS = 8.0
# coordinate increments (relative) below which Itoh-Abe uses quadrature
_QUAD_SWITCH = 1e-2


class Kind(enum.Enum):
    MEAN_VALUE = "mean-value"
    MIDPOINT = "midpoint"
    COORDINATE_INCREMENT = "coordinate-increment"


_ALIASES = {
    "mean-value": Kind.MEAN_VALUE,
    "avf": Kind.MEAN_VALUE,
    "midpoint": Kind.MIDPOINT,
    "gonzalez": Kind.MIDPOINT,
    "coordinate-increment": Kind.COORDINATE_INCREMENT,
    "itoh-abe": Kind.COORDINATE_INCREMENT,
}


@dataclass(frozen=True)
class DiscreteGradientScheme:
    """Choice of discrete gradient.

    ``degeneracy_eps`` scales the threshold ``eps * (1 + |x| + |x'|)``
    below which ``x'`` is treated as equal to ``x``.
    ``quadrature_points`` is only used by the mean value gradient, which is
    exact for polynomial ``H`` of degree up to ``2 * quadrature_points``.
    """

    kind: Kind = Kind.MIDPOINT
    quadrature_points: int = 10
    degeneracy_eps: float = 1e-14

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", parse_kind(self.kind))
        if self.quadrature_points < 2:
            raise ConfigurationError("mean value gradient needs at least 2 quadrature points")
        if not self.degeneracy_eps > 0:
            raise ConfigurationError("degeneracy_eps must be positive")

    @classmethod
    def named(cls, name: str, **kwargs) -> "DiscreteGradientScheme":
        return cls(parse_kind(name), **kwargs)

    @property
    def name(self) -> str:
        return self.kind.value


def parse_kind(name: str) -> Kind:
    try:
        return _ALIASES[name.strip().lower()]
    except KeyError:
        raise ConfigurationError(
            f"unknown discrete gradient {name!r}; expected one of {sorted(set(_ALIASES))}"
        ) from None


@lru_cache(maxsize=None)
def _gauss_legendre_01(n: int):
    s, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (s + 1.0), 0.5 * w


def _threshold(scheme, x, xp):
    return scheme.degeneracy_eps * (1.0 + np.linalg.norm(x) + np.linalg.norm(xp))


def discrete_gradient(scheme: DiscreteGradientScheme, h: ScalarField, x, xp) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if x.shape != xp.shape or x.ndim != 1:
        raise ConfigurationError(f"dimension mismatch: {x.shape} vs {xp.shape}")
    kind = scheme.kind
    d = xp - x
    thr = _threshold(scheme, x, xp)

    if kind is Kind.COORDINATE_INCREMENT:
        return _coordinate_increment(scheme, h, x, xp, thr)

    z = 0.5 * (x + xp)
    if np.linalg.norm(d) < thr:
        return h.gradient(z)

    if kind is Kind.MIDPOINT:
        g = h.gradient(z)
        hx, hxp = h(x), h(xp)
        gd = g * d
        num = hxp - hx - float(np.sum(gd))
        noise = _NOISE_ULPS * _EPS * (abs(hx) + abs(hxp) + float(np.sum(np.abs(gd))))
        if abs(num) <= noise:
            return g
        return g + (num / float(d @ d)) * d

    nodes, weights = _gauss_legendre_01(scheme.quadrature_points)
    out = np.zeros_like(x)
    for t, w in zip(nodes, weights):
        out += w * h.gradient(x + t * d)
    return out


def _coordinate_increment(scheme, h, x, xp, thr):
    n = x.size
    out = np.empty(n)
    y = x.copy()
    h_prev = h(y)
    # below this increment the difference quotient loses digits to
    # cancellation; integrate the partial derivative along the segment instead
    quad_below = _QUAD_SWITCH * (1.0 + np.linalg.norm(x) + np.linalg.norm(xp)) if h.grad is not None else 0.0
    for i in range(n):
        di = xp[i] - x[i]
        if abs(di) < thr:
            # partial derivative at (x'_1..x'_{i-1}, x_i, ..., x_n)
            out[i] = h.gradient(y)[i]
            y[i] = xp[i]
            h_prev = h(y)
            continue
        if abs(di) < quad_below:
            nodes, weights = _gauss_legendre_01(scheme.quadrature_points)
            acc = 0.0
            yi = y[i]
            for t, w in zip(nodes, weights):
                y[i] = yi + t * di
                acc += w * h.gradient(y)[i]
            out[i] = acc
            y[i] = xp[i]
            h_prev = h(y)
            continue
        y[i] = xp[i]
        h_next = h(y)
        out[i] = (h_next - h_prev) / di
        h_prev = h_next
    return out


class AxiomReport(NamedTuple):
    directional: float
    consistency: float


def verify_axioms(scheme: DiscreteGradientScheme, h: ScalarField, samples) -> AxiomReport:
    """Max directional and consistency residuals over ``(x, x')`` pairs.

    directional: ``|dg . (x' - x) - (H(x') - H(x))| / (1 + |H(x')| + |H(x)|)``
    consistency: ``|dg(x, x) - grad H(x)| / (1 + |grad H(x)|)``
    """
    directional = 0.0
    consistency = 0.0
    for x, xp in samples:
        x = np.asarray(x, dtype=float)
        xp = np.asarray(xp, dtype=float)
        hx, hxp = h(x), h(xp)
        g = discrete_gradient(scheme, h, x, xp)
        directional = max(directional, abs(g @ (xp - x) - (hxp - hx)) / (1.0 + abs(hxp) + abs(hx)))
        gx = h.gradient(x)
        g0 = discrete_gradient(scheme, h, x, x)
        consistency = max(consistency, np.linalg.norm(g0 - gx) / (1.0 + np.linalg.norm(gx)))
    return AxiomReport(float(directional), float(consistency))
