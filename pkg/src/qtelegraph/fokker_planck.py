"""Closed-form and quadrature oracles for the long-run behavior.

The stationary density of the collapse SDE is

    rho(y) = N / (1-y^2)^2 * exp{ (2/alpha^2) * int_0^y u(q)/(1-q^2)^2 dq }

with drift u(q) = -(1+q)/T + g(1-q).  The inner integrand grows like
1/(1-q^2)^2 near the endpoints and drives the exponent to -infinity, so
everything is evaluated in the log domain and never at |y| >= 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate as _scipy_integrate

from .model import ModelParams

QUAD_REL_TOL = 1e-10
# density at the grid ends must fall below this fraction of the peak
_END_FRACTION = 1e-15
_LOG_END_GAP = math.log(_END_FRACTION)


@dataclass(frozen=True)
class StationaryDensity:
    """Normalized stationary density sampled on a uniform interior grid."""

    y: np.ndarray
    rho: np.ndarray
    norm_constant: float
    method: str
    rel_tol: float

    def __post_init__(self):
        if self.y.shape != self.rho.shape:
            raise ValueError("grid and density must have equal length")
        if (self.rho < 0).any():
            raise ValueError("density must be nonnegative")

    @property
    def grid_step(self) -> float:
        return float(self.y[1] - self.y[0])

    def to_csv(self, path) -> None:
        from .integrate import write_csv
        write_csv(path, "y,rho", np.column_stack([self.y, self.rho]))

    def to_json(self) -> str:
        return json.dumps({
            "y": self.y.tolist(),
            "rho": self.rho.tolist(),
            "norm_constant": self.norm_constant,
            "method": self.method,
            "rel_tol": self.rel_tol,
        })

    def bin_masses(self, edges: np.ndarray) -> np.ndarray:
        """Integrate the density over histogram bins (trapezoid on the
        evaluation grid; grid points outside [edges[0], edges[-1]] carry
        no mass)."""
        cum = np.concatenate([[0.0], np.cumsum(
            0.5 * (self.rho[1:] + self.rho[:-1]) * np.diff(self.y))])
        at = np.interp(edges, self.y, cum, left=0.0, right=cum[-1])
        return np.diff(at)


def _drift_over_sq(q: float, g: float, inv_t: float) -> float:
    one_minus = 1.0 - q * q
    return (-(1.0 + q) * inv_t + g * (1.0 - q)) / (one_minus * one_minus)


def log_unnormalized_density(y: float, params: ModelParams) -> float:
    """log of the unnormalized stationary density at a single point.

    -2*log(1-y^2) + (2/alpha^2) * int_0^y u(q)/(1-q^2)^2 dq, the inner
    integral by adaptive quadrature at relative tolerance 1e-10.
    """
    if abs(y) >= 1.0:
        raise ValueError(f"y must lie strictly inside (-1, 1), got {y}")
    if params.alpha <= 0:
        raise ValueError("stationary density requires alpha > 0")
    if y == 0.0:
        return 0.0
    val, err = _scipy_integrate.quad(
        _drift_over_sq, 0.0, y, args=(params.g, params.inv_t),
        epsabs=0.0, epsrel=QUAD_REL_TOL, limit=200)
    if not math.isfinite(val):
        raise RuntimeError(f"quadrature failed at y = {y}")
    return -2.0 * math.log1p(-y * y) \
        + (2.0 / (params.alpha * params.alpha)) * val


def _log_density_grid(params: ModelParams, grid: np.ndarray) -> np.ndarray:
    """Cumulative adaptive quadrature across the grid (one panel per cell)."""
    inc = np.empty(grid.size)
    # anchor the running integral at the grid point nearest 0
    i0 = int(np.argmin(np.abs(grid)))
    val0, _ = _scipy_integrate.quad(
        _drift_over_sq, 0.0, grid[i0], args=(params.g, params.inv_t),
        epsabs=0.0, epsrel=QUAD_REL_TOL, limit=200)
    inc[i0] = val0
    for i in range(i0 + 1, grid.size):
        v, _ = _scipy_integrate.quad(
            _drift_over_sq, grid[i - 1], grid[i],
            args=(params.g, params.inv_t),
            epsabs=1e-14, epsrel=QUAD_REL_TOL, limit=200)
        inc[i] = inc[i - 1] + v
    for i in range(i0 - 1, -1, -1):
        v, _ = _scipy_integrate.quad(
            _drift_over_sq, grid[i], grid[i + 1],
            args=(params.g, params.inv_t),
            epsabs=1e-14, epsrel=QUAD_REL_TOL, limit=200)
        inc[i] = inc[i + 1] - v
    scale = 2.0 / (params.alpha * params.alpha)
    return -2.0 * np.log1p(-grid * grid) + scale * inc


def stationary_density(params: ModelParams, n_grid: int = 4096,
                       y_margin: float = 1e-3) -> StationaryDensity:
    """Normalized stationary density on a uniform grid inside (-1, 1).

    The margin is halved until the density at both grid ends is below
    1e-15 of its maximum, then the log values are exponentiated with
    max subtraction and normalized by the trapezoid rule on the grid.
    """
    if n_grid < 64:
        raise ValueError("n_grid must be >= 64")
    if not (0.0 < y_margin < 0.1):
        raise ValueError(f"y_margin must lie in (0, 0.1), got {y_margin}")
    margin = y_margin
    log_rho = grid = None
    for _ in range(40):
        grid = np.linspace(-1.0 + margin, 1.0 - margin, n_grid)
        log_rho = _log_density_grid(params, grid)
        peak = log_rho.max()
        if log_rho[0] - peak <= _LOG_END_GAP and \
                log_rho[-1] - peak <= _LOG_END_GAP:
            break
        margin *= 0.5
    else:
        raise RuntimeError("could not find a margin with negligible "
                           "endpoint density")
    peak = log_rho.max()
    rho = np.exp(log_rho - peak)
    z = np.trapezoid(rho, grid)
    if not (z > 0) or not math.isfinite(z):
        raise RuntimeError("degenerate normalization")
    rho /= z
    # overall constant N(alpha, g, T) mapping the unnormalized form to rho
    norm_constant = math.exp(-peak) / z
    return StationaryDensity(grid, rho, norm_constant,
                             "adaptive-quadrature(log-domain)", QUAD_REL_TOL)


def fp_residual(density: StationaryDensity, params: ModelParams) -> float:
    """Normalized stationary-equation residual on the interior grid.

    Checks 0 = -d/dy[u rho] + 1/2 d^2/dy^2[sigma^2 rho] with central
    finite differences; the maximum absolute residual is normalized by
    the maximum absolute diffusion term.
    """
    if density.y.size < 9:
        raise ValueError("grid too coarse for finite differences")
    y = density.y
    h = density.grid_step
    u = -(1.0 + y) * params.inv_t + params.g * (1.0 - y)
    sigma_sq = (params.alpha * (1.0 - y * y)) ** 2
    flux = u * density.rho
    diff = sigma_sq * density.rho
    # fourth-order central differences (still inside the central-FD
    # family; second-order is too coarse for the near-boundary peaks at
    # large alpha on a 4096-point grid)
    d1 = (flux[:-4] - 8 * flux[1:-3] + 8 * flux[3:-1] - flux[4:]) / (12 * h)
    d2 = (-diff[:-4] + 16 * diff[1:-3] - 30 * diff[2:-2]
          + 16 * diff[3:-1] - diff[4:]) / (12 * h * h)
    residual = -d1 + 0.5 * d2
    denom = np.abs(0.5 * d2).max()
    if denom == 0:
        raise ValueError("degenerate density: zero diffusion term")
    return float(np.abs(residual).max() / denom)


def analytic_exit_lower(delta: float, g: float) -> float:
    """Mean time to leave the lower band, from the linearized process:
    delta/(2 g)."""
    if not (delta > 0):
        raise ValueError(f"delta must be > 0, got {delta}")
    if not (g > 0):
        raise ValueError(f"g must be > 0, got {g}")
    return delta / (2.0 * g)


def analytic_exit_upper(delta: float, t_decay: float) -> float:
    """Mean time to leave the upper band, from the linearized process:
    T*delta/2."""
    if not (delta > 0):
        raise ValueError(f"delta must be > 0, got {delta}")
    if not (t_decay > 0):
        raise ValueError(f"t_decay must be > 0, got {t_decay}")
    return t_decay * delta / 2.0


def _check_bound_domain(delta: float, g: float, t_decay: float) -> None:
    if not (delta > 0 and g > 0 and t_decay > 0):
        raise ValueError("delta, g, t_decay must all be positive")
    gt = g * t_decay
    if not (2.0 * gt > delta * (1.0 + gt)):
        raise ValueError(
            f"bound requires 2gT = {2 * gt:g} to exceed "
            f"delta(1+gT) = {delta * (1 + gt):g}")


def exit_time_bound(delta: float, g: float, t_decay: float) -> float:
    """Rigorous upper bound delta/g on the lower-band mean exit time.

    Valid when 2gT > delta(1+gT); rejected otherwise.
    """
    _check_bound_domain(delta, g, t_decay)
    return delta / g


def gap_bound(delta: float, g: float, t_decay: float, alpha: float,
              t: float) -> float:
    """Upper bound on E[(V-X)^2] at time t (pair frozen at exit).

    4 delta^2 ((1/T + g)^2 + alpha^2 delta^4 / 2) * (delta/g) * e^{12 t},
    with the mean exit time replaced by its delta/g bound.  Sufficient,
    not tight.
    """
    _check_bound_domain(delta, g, t_decay)
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    rate_sq = (1.0 / t_decay + g) ** 2
    return 4.0 * delta ** 2 * (rate_sq + 0.5 * alpha ** 2 * delta ** 4) \
        * (delta / g) * math.exp(12.0 * t)
