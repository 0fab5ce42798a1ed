"""Maximal monotone graphs on the real line.

Three graph families are supported, each the subdifferential of a convex
potential vanishing at zero:

* ``DoubleObstacle(lo, hi)`` -- indicator potential of [lo, hi]; the graph has
  vertical half-lines at the obstacles and is 0 in between.
* ``Logarithmic(kappa0, kappa1)`` -- entropy-type potential
  kappa1*((1+u)ln(1+u) + (1-u)ln(1-u)) on [-1, 1]; the graph blows up at the
  endpoints, so its effective domain is the open interval (-1, 1).
* ``DoubleWell(kappa)`` -- quartic potential kappa*u**4/4 with graph
  kappa*u**3, single-valued on all of R.

Multivalued evaluation is exposed only through the resolvent, the Yosida
approximation, the Moreau envelope and the minimal section; this is all a
time stepper for monotone inclusions ever needs.  Every function accepts a
scalar or an ndarray of points and is pure, so concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import kernels
from .errors import DomainViolationError

__all__ = [
    "DoubleObstacle",
    "Logarithmic",
    "DoubleWell",
    "GraphSpec",
    "CouplingSpec",
    "default_coupling",
    "potential",
    "resolvent",
    "yosida",
    "yosida_with_derivative",
    "moreau",
    "minimal_section",
    "gamma",
    "gamma_prime",
    "domain_interval",
    "is_single_valued",
    "defined_on_real_line",
]


@dataclass(frozen=True)
class DoubleObstacle:
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"obstacle interval needs lo < hi, got [{self.lo}, {self.hi}]")
        if not (self.lo <= 0.0 <= self.hi):
            raise ValueError("obstacle interval must contain 0 so that the graph vanishes there")


@dataclass(frozen=True)
class Logarithmic:
    kappa0: float = 2.0
    kappa1: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.kappa1 < self.kappa0:
            raise ValueError(
                f"logarithmic graph needs 0 < kappa1 < kappa0, got kappa0={self.kappa0}, kappa1={self.kappa1}"
            )


@dataclass(frozen=True)
class DoubleWell:
    kappa: float = 1.0

    def __post_init__(self):
        if not self.kappa > 0.0:
            raise ValueError(f"double-well coefficient must be positive, got {self.kappa}")


GraphSpec = Union[DoubleObstacle, Logarithmic, DoubleWell]


def is_single_valued(spec: GraphSpec) -> bool:
    return not isinstance(spec, DoubleObstacle)


def defined_on_real_line(spec: GraphSpec) -> bool:
    return isinstance(spec, DoubleWell)


def domain_interval(spec: GraphSpec):
    """Effective domain of the graph as (lo, hi, lo_closed, hi_closed)."""
    if isinstance(spec, DoubleObstacle):
        return spec.lo, spec.hi, True, True
    if isinstance(spec, Logarithmic):
        return -1.0, 1.0, False, False
    return -np.inf, np.inf, True, True


def _as_array(s):
    arr = np.asarray(s, dtype=float)
    return arr, arr.ndim == 0


def _restore(arr, scalar):
    return float(arr) if scalar else arr


def _xlogx(t):
    # t*log(t) extended by continuity with value 0 at t = 0
    t = np.maximum(t, 0.0)
    out = np.zeros_like(t)
    pos = t > 0.0
    out[pos] = t[pos] * np.log(t[pos])
    return out


def potential(spec: GraphSpec, s):
    """Convex potential of the graph; +inf outside its closed domain."""
    arr, scalar = _as_array(s)
    arr = np.atleast_1d(arr)
    if isinstance(spec, DoubleObstacle):
        out = np.where((arr >= spec.lo) & (arr <= spec.hi), 0.0, np.inf)
    elif isinstance(spec, Logarithmic):
        out = np.full_like(arr, np.inf)
        inside = np.abs(arr) <= 1.0
        v = arr[inside]
        out[inside] = spec.kappa1 * (_xlogx(1.0 + v) + _xlogx(1.0 - v))
    else:
        out = spec.kappa * arr**4 / 4.0
    return _restore(out[0] if scalar else out, scalar)


def resolvent(spec: GraphSpec, eps: float, s):
    """Value of (I + eps*graph)^{-1} at s; single-valued for every eps > 0."""
    if eps <= 0.0:
        raise ValueError(f"resolvent parameter must be positive, got eps={eps}")
    arr, scalar = _as_array(s)
    arr = np.ascontiguousarray(np.atleast_1d(arr))
    if isinstance(spec, DoubleObstacle):
        out = np.clip(arr, spec.lo, spec.hi)
    elif isinstance(spec, Logarithmic):
        out = kernels.resolvent_log(arr, eps * spec.kappa1)
    else:
        out = kernels.resolvent_cubic(arr, eps * spec.kappa)
    return _restore(out[0] if scalar else out, scalar)


def yosida(spec: GraphSpec, eps: float, s):
    """Yosida approximation (s - resolvent(s))/eps; monotone and Lipschitz."""
    arr, scalar = _as_array(s)
    arr = np.atleast_1d(arr)
    r = resolvent(spec, eps, arr)
    out = (arr - r) / eps
    return _restore(out[0] if scalar else out, scalar)


def gamma(spec: GraphSpec, s):
    """Pointwise graph value for single-valued kinds.

    Raises for the double obstacle (multivalued at the obstacles) and for
    points outside the effective domain.
    """
    if isinstance(spec, DoubleObstacle):
        raise DomainViolationError("the double-obstacle graph has no single-valued evaluation")
    arr, scalar = _as_array(s)
    arr = np.atleast_1d(arr)
    if isinstance(spec, Logarithmic):
        if np.any(np.abs(arr) >= 1.0):
            raise DomainViolationError("logarithmic graph is defined on the open interval (-1, 1)")
        out = spec.kappa1 * np.log((1.0 + arr) / (1.0 - arr))
    else:
        out = spec.kappa * arr**3
    return _restore(out[0] if scalar else out, scalar)


def gamma_prime(spec: GraphSpec, s):
    """Derivative of the graph for single-valued kinds (used by Newton steps)."""
    if isinstance(spec, DoubleObstacle):
        raise DomainViolationError("the double-obstacle graph has no single-valued evaluation")
    arr, scalar = _as_array(s)
    arr = np.atleast_1d(arr)
    if isinstance(spec, Logarithmic):
        if np.any(np.abs(arr) >= 1.0):
            raise DomainViolationError("logarithmic graph is defined on the open interval (-1, 1)")
        out = 2.0 * spec.kappa1 / (1.0 - arr**2)
    else:
        out = 3.0 * spec.kappa * arr**2
    return _restore(out[0] if scalar else out, scalar)


def yosida_with_derivative(spec: GraphSpec, eps: float, s):
    """Yosida value and its derivative, sharing one resolvent evaluation.

    The derivative is gamma'(r)/(1 + eps*gamma'(r)) with r the resolvent; for
    the obstacle it is the indicator slope 0 inside, 1/eps outside.
    """
    arr, scalar = _as_array(s)
    arr = np.atleast_1d(arr)
    r = resolvent(spec, eps, arr)
    val = (arr - r) / eps
    if isinstance(spec, DoubleObstacle):
        der = np.where((arr > spec.lo) & (arr < spec.hi), 0.0, 1.0 / eps)
    else:
        gp = gamma_prime(spec, r)
        der = gp / (1.0 + eps * gp)
    if scalar:
        return float(val[0]), float(der[0])
    return val, der


def moreau(spec: GraphSpec, eps: float, s):
    """Moreau envelope |s - r|^2/(2 eps) + potential(r), r the resolvent."""
    arr, scalar = _as_array(s)
    arr = np.atleast_1d(arr)
    r = resolvent(spec, eps, arr)
    out = (arr - r) ** 2 / (2.0 * eps) + potential(spec, r)
    return _restore(out[0] if scalar else out, scalar)


def minimal_section(spec: GraphSpec, s):
    """Element of the graph at s with least modulus; requires s in the domain."""
    arr, scalar = _as_array(s)
    arr = np.atleast_1d(arr)
    if isinstance(spec, DoubleObstacle):
        if np.any((arr < spec.lo) | (arr > spec.hi)):
            raise DomainViolationError(
                f"point outside the obstacle interval [{spec.lo}, {spec.hi}]"
            )
        # 0 belongs to the graph everywhere on [lo, hi], including the obstacles
        out = np.zeros_like(arr)
    else:
        out = np.atleast_1d(np.asarray(gamma(spec, arr), dtype=float))
    return _restore(out[0] if scalar else out, scalar)


@dataclass(frozen=True)
class CouplingSpec:
    """Smooth coupling of the phase equation.

    ``g(s) = gbar(s) + s`` by construction, ``G`` is an antiderivative of
    ``gbar`` (used only by the free-energy diagnostic) and ``lip_g`` is a
    Lipschitz constant of ``g``.  ``dg`` is the derivative of ``g`` where the
    caller knows it; Newton-type inner solves use it when present.  When g
    is exactly linear, ``linear_slope`` records its slope so the stepper can
    route merged cubic solves through the fused kernel.
    """

    gbar: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    G: Callable[[np.ndarray], np.ndarray]
    lip_g: float
    dg: Callable[[np.ndarray], np.ndarray] | None = None
    linear_slope: float | None = None


def default_coupling(spec: GraphSpec) -> CouplingSpec:
    """Standard coupling paired with each graph family.

    Obstacle: G(u) = 1 - u^2.  Logarithmic: G(u) = kappa0*(1 - u^2).
    Double well: G(u) = kappa*(1 - 2 u^2)/4, which combines with the quartic
    potential into the classical two-well shape kappa/4*(u^2-1)^2 and gives
    g(u) = (1 - kappa)*u.
    """
    if isinstance(spec, DoubleObstacle):
        c = 1.0
    elif isinstance(spec, Logarithmic):
        c = spec.kappa0
    else:
        k = spec.kappa

        def gbar(s):
            return -k * np.asarray(s, dtype=float)

        def g(s):
            return (1.0 - k) * np.asarray(s, dtype=float)

        def G(s):
            return k * (1.0 - 2.0 * np.asarray(s, dtype=float) ** 2) / 4.0

        def dg(s):
            return np.full_like(np.asarray(s, dtype=float), 1.0 - k)

        return CouplingSpec(gbar=gbar, g=g, G=G, lip_g=abs(1.0 - k), dg=dg,
                            linear_slope=1.0 - k)

    def gbar(s):
        return -2.0 * c * np.asarray(s, dtype=float)

    def g(s):
        return (1.0 - 2.0 * c) * np.asarray(s, dtype=float)

    def G(s):
        return c * (1.0 - np.asarray(s, dtype=float) ** 2)

    def dg(s):
        return np.full_like(np.asarray(s, dtype=float), 1.0 - 2.0 * c)

    return CouplingSpec(gbar=gbar, g=g, G=G, lip_g=abs(1.0 - 2.0 * c), dg=dg,
                        linear_slope=1.0 - 2.0 * c)
