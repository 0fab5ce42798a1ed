"""Discrete Sobolev norms, their time-aggregated versions, and rate fitting.

Spatial norms on a grid field u:

* H      -- weighted l2 (trapezoid quadrature)
* V      -- sqrt(H^2 + ||grad u||^2), forward-difference gradient on cell
            midpoints with midpoint quadrature
* Vdual  -- dual norm through the Riesz solve z - Lap z = u; equals
            sqrt(<u, z>) and never exceeds the H norm
* W      -- sqrt(H^2 + ||grad u||^2 + ||Lap u||^2) with the Neumann Laplacian

Time aggregation over a trajectory u^0..u^M with step tau:

* LinfT  -- max over all time nodes
* L2T    -- sqrt(tau * sum over steps 1..M) of the squared spatial norm
* W1infT -- max over steps 1..M of the backward difference (u^m-u^{m-1})/tau
            measured in the spatial norm
* H1T    -- sqrt(tau * sum) of that quantity squared

Backward differences are the native derivative of the implicit Euler
stepper, so no value at t < 0 is ever invented.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateDataError, TrajectoryError
from .grid import SpaceGrid, laplacian_neumann, solve_helmholtz

__all__ = [
    "norm_h",
    "norm_v",
    "norm_vdual",
    "norm_w",
    "SPACE_NORMS",
    "TIME_AGGREGATIONS",
    "bochner",
    "RateFit",
    "fit_rate",
]


def norm_h(grid: SpaceGrid, u: np.ndarray):
    """Discrete L2 norm; accepts any (..., n) stack of fields."""
    return np.sqrt(np.sum(grid.weights * np.asarray(u, dtype=float) ** 2, axis=-1))


def _grad_sq(grid: SpaceGrid, u: np.ndarray):
    g = np.diff(u, axis=-1) / grid.dx
    return grid.dx * np.sum(g * g, axis=-1)


def norm_v(grid: SpaceGrid, u: np.ndarray):
    u = np.asarray(u, dtype=float)
    return np.sqrt(norm_h(grid, u) ** 2 + _grad_sq(grid, u))


def norm_w(grid: SpaceGrid, u: np.ndarray):
    u = np.asarray(u, dtype=float)
    lap = laplacian_neumann(grid, u)
    return np.sqrt(norm_h(grid, u) ** 2 + _grad_sq(grid, u) + norm_h(grid, lap) ** 2)


def norm_vdual(grid: SpaceGrid, h: np.ndarray):
    """Dual norm via the Riesz representer of the V inner product.

    With z solving z - Lap z = h, summation by parts gives
    <h, z> = ||z||_V^2, so the returned value is both sqrt(<h, z>) and
    ||z||_V; it is bounded by the H norm of h.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim == 1:
        z = solve_helmholtz(grid, 1.0, 1.0, h)
        return float(np.sqrt(max(np.sum(grid.weights * h * z), 0.0)))
    return np.array([norm_vdual(grid, row) for row in h])


SPACE_NORMS = {"H": norm_h, "V": norm_v, "Vdual": norm_vdual, "W": norm_w}
TIME_AGGREGATIONS = ("LinfT", "L2T", "W1infT", "H1T")


def bochner(grid: SpaceGrid, fields, tau: float, space: str = "H", time: str = "LinfT"):
    """Time-aggregated spatial norm of a trajectory component.

    ``fields`` is an (M+1, n) array (or sequence of fields) sampled at the
    time nodes 0..M.  Derivative aggregations need at least two time levels.
    """
    if space not in SPACE_NORMS:
        raise ValueError(f"unknown spatial norm {space!r}; choose from {sorted(SPACE_NORMS)}")
    if time not in TIME_AGGREGATIONS:
        raise ValueError(f"unknown time aggregation {time!r}; choose from {TIME_AGGREGATIONS}")
    arr = np.asarray(fields, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != grid.n:
        raise TrajectoryError(f"expected an (M+1, {grid.n}) field stack, got shape {arr.shape}")
    if tau <= 0.0:
        raise ValueError(f"time step must be positive, got tau={tau}")
    sn = SPACE_NORMS[space]
    if time in ("W1infT", "H1T"):
        if arr.shape[0] < 2:
            raise TrajectoryError(f"{time} needs at least 2 time levels, got {arr.shape[0]}")
        rates = np.diff(arr, axis=0) / tau
        vals = np.atleast_1d(sn(grid, rates))
        return float(np.max(vals)) if time == "W1infT" else float(np.sqrt(tau * np.sum(vals**2)))
    vals = np.atleast_1d(sn(grid, arr))
    if time == "LinfT":
        return float(np.max(vals))
    return float(np.sqrt(tau * np.sum(vals[1:] ** 2)))


class RateFit(NamedTuple):
    slope: float
    residual: float
    n_used: int


def fit_rate(points: Sequence[tuple[float, float]]) -> RateFit:
    """Least-squares slope of log(error) against log(alpha).

    Zero errors are excluded with a warning (log undefined); an all-zero
    list means the compared runs were identical and admits no rate.  The
    residual is the RMS deviation of the fitted line.
    """
    pts = [(float(a), float(e)) for a, e in points]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 sweep points to fit a rate, got {len(pts)}")
    if any(a <= 0.0 for a, _ in pts):
        raise ValueError("all sweep parameters must be positive")
    if any(e < 0.0 for _, e in pts):
        raise ValueError("errors must be nonnegative")
    kept = [(a, e) for a, e in pts if e > 0.0]
    if not kept:
        raise DegenerateDataError("all sweep errors are zero: the compared runs are identical")
    if len(kept) < len(pts):
        warnings.warn(
            f"excluded {len(pts) - len(kept)} zero-error point(s) from the rate fit",
            stacklevel=2,
        )
    if len(kept) < 3:
        raise DegenerateDataError("fewer than 3 nonzero errors remain; rate undefined")
    la = np.log([a for a, _ in kept])
    le = np.log([e for _, e in kept])
    la_c = la - la.mean()
    slope = float(np.dot(la_c, le - le.mean()) / np.dot(la_c, la_c))
    intercept = float(le.mean() - slope * la.mean())
    dev = le - (slope * la + intercept)
    return RateFit(slope=slope, residual=float(np.sqrt(np.mean(dev**2))), n_used=len(kept))
