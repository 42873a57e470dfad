"""Concrete model builders: the conditional OU process with common noise,
its exact solution coupled to shared increments, the interbank market model
with a pluggable control policy, and a fixed-step RK4 solver for control
coefficient schedules."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .core import EmpiricalMeasure, ModelSpec, TimeGrid

__all__ = [
    "CondOuParams",
    "cond_ou_model",
    "cond_ou_exact_path",
    "cond_ou_exact_paths",
    "cond_ou_true_density",
    "ControlPolicy",
    "affine_control",
    "InterbankParams",
    "interbank_model",
    "macro_state_path",
    "OdeSystem",
    "rk4_solve",
    "load_schedule_csv",
]


# ---------------------------------------------------------------------------
# Conditional OU with common noise: dX = -(X - E^1 X) dt + s dW + s0 dW0
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CondOuParams:
    dim_d: int = 1
    sigma: float = np.sqrt(0.2)
    sigma0: float = np.sqrt(0.2)
    x0: Union[float, np.ndarray] = 0.0

    def __post_init__(self):
        # sigma = 0 is allowed for degenerate strong-error checks; the
        # conditional density additionally requires sigma > 0
        if self.sigma < 0 or self.sigma0 < 0:
            raise ValueError("sigma and sigma0 must be nonnegative")
        x0 = np.broadcast_to(np.asarray(self.x0, dtype=float), (self.dim_d,)).copy()
        if not np.all(np.isfinite(x0)):
            raise ValueError("x0 must be finite")
        object.__setattr__(self, "x0", x0)


def cond_ou_model(params: CondOuParams) -> ModelSpec:
    """Mean-reverting-to-the-empirical-mean model with constant diffusions.

    d = q; both diffusion matrices are scalar multiples of the identity.
    """
    d = params.dim_d
    sig = params.sigma * np.eye(d)
    sig0 = params.sigma0 * np.eye(d)

    def drift(t, X, mu: EmpiricalMeasure):
        return -(X - mu.mean())

    return ModelSpec(
        dim_state_d=d,
        dim_noise_q=d,
        drift=drift,
        idio_diffusion=lambda t, X, mu: sig,
        common_diffusion=lambda t, X, mu: sig0,
        holder_rho=1.0,
        lipschitz_L=1.0,
    )


def cond_ou_exact_paths(
    params: CondOuParams,
    idio: np.ndarray,  # (N, M, q)
    common: np.ndarray,  # (M, q)
    grid: TimeGrid,
) -> np.ndarray:
    """Exact solution paths on the grid, driven by the given increments.

    The stochastic convolution integral is discretized left-point on the
    same grid, via the recursion I_{m+1} = e^{-h} (I_m + sqrt(h) Z_{m+1});
    the common-noise term uses the cumulated increments directly.
    Returns an (N, M+1, d) array.
    """
    if np.any(params.x0 != 0.0):
        warnings.warn(
            "exact conditional-OU path assumes x0 = 0; the e^{-t} x0 term "
            "only solves the dynamics at the mean-field limit",
            stacklevel=2,
        )
    N, M, q = idio.shape
    d = params.dim_d
    if q != d or common.shape != (M, q) or M != grid.steps_M:
        raise ValueError(
            f"increment shapes ({idio.shape}, {common.shape}) do not match d={d}, M={grid.steps_M}"
        )
    h = grid.step_h
    sqrt_h = np.sqrt(h)
    decay = np.exp(-h)

    paths = np.empty((N, M + 1, d))
    conv = np.zeros((N, d))
    w0 = np.zeros(d)
    paths[:, 0, :] = np.exp(-grid.nodes[0]) * params.x0
    for m in range(M):
        conv = decay * (conv + sqrt_h * idio[:, m, :])
        w0 = w0 + sqrt_h * common[m]
        paths[:, m + 1, :] = (
            np.exp(-grid.nodes[m + 1]) * params.x0 + params.sigma * conv + params.sigma0 * w0
        )
    return paths


def cond_ou_exact_path(
    params: CondOuParams, idio: np.ndarray, common: np.ndarray, grid: TimeGrid
) -> np.ndarray:
    """Single-particle version of :func:`cond_ou_exact_paths`; idio is (M, q)."""
    return cond_ou_exact_paths(params, np.asarray(idio, dtype=float)[None, :, :], common, grid)[0]


def cond_ou_true_density(
    params: CondOuParams, t: float, w0_value: float, x: np.ndarray
) -> np.ndarray:
    """Conditional density of the 1-d process given the common-noise value.

    Gaussian with mean e^{-t} x0 + sigma0 * W0_t and variance
    sigma^2 (1 - e^{-2t}) / 2 (Ito isometry applied to the exact solution).
    """
    if params.dim_d != 1:
        raise ValueError("true density is only available in dimension 1")
    if t <= 0:
        raise ValueError(f"density requires t > 0, got t={t}")
    if params.sigma == 0:
        raise ValueError("density is degenerate for sigma = 0")
    mean = np.exp(-t) * float(params.x0[0]) + params.sigma0 * w0_value
    var = params.sigma**2 * (1.0 - np.exp(-2.0 * t)) / 2.0
    x = np.asarray(x, dtype=float)
    return np.exp(-((x - mean) ** 2) / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)


# ---------------------------------------------------------------------------
# Interbank market model
# ---------------------------------------------------------------------------

Schedule = Callable[[float], float]


def _as_schedule(value: Union[float, Schedule]) -> Schedule:
    if callable(value):
        return value
    c = float(value)
    return lambda t: c


@dataclass(frozen=True)
class ControlPolicy:
    """Per-bank transaction rate u(t, x, market_mean) together with the
    population rate it induces when averaged over the cloud."""

    per_bank: Callable[[float, np.ndarray, float], np.ndarray]
    population_rate: Schedule


def affine_control(c1: Union[float, Schedule] = 0.0, c2: Union[float, Schedule] = 1.0) -> ControlPolicy:
    """u(t, x, m) = c1(t) + c2(t) (m - x); the mean-reversion part averages
    to zero over any cloud, so the population rate is c1(t)."""
    f1, f2 = _as_schedule(c1), _as_schedule(c2)

    def per_bank(t, x, market_mean):
        return f1(t) + f2(t) * (market_mean - x)

    return ControlPolicy(per_bank=per_bank, population_rate=f1)


@dataclass(frozen=True)
class InterbankParams:
    mean_reversion_a: float = 10.0
    liquidity_b: Union[float, Schedule] = 1.0
    sigma: float = 0.5
    rho: float = 0.5
    control: ControlPolicy = field(default_factory=affine_control)

    def __post_init__(self):
        if not (0.0 <= self.rho <= 1.0):
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "liquidity_b", _as_schedule(self.liquidity_b))


def interbank_model(params: InterbankParams) -> ModelSpec:
    """One-dimensional bank log-reserve dynamics: mean reversion toward the
    market mean, the control rate, liquidity inflow, and split noise with
    idiosyncratic loading sigma*sqrt(1-rho^2) and common loading sigma*rho."""
    a = params.mean_reversion_a
    b = params.liquidity_b
    ctrl = params.control
    idio_coeff = np.array([[params.sigma * np.sqrt(1.0 - params.rho**2)]])
    common_coeff = np.array([[params.sigma * params.rho]])

    def drift(t, X, mu: EmpiricalMeasure):
        m = float(mu.mean()[0])
        x = X[:, 0]
        return (a * (m - x) + ctrl.per_bank(t, x, m) + b(t))[:, None]

    return ModelSpec(
        dim_state_d=1,
        dim_noise_q=1,
        drift=drift,
        idio_diffusion=lambda t, X, mu: idio_coeff,
        common_diffusion=lambda t, X, mu: common_coeff,
        holder_rho=1.0,
    )


def macro_state_path(
    params: InterbankParams, common: np.ndarray, grid: TimeGrid, xbar0: float = 0.0
) -> np.ndarray:
    """Euler path of the limiting market state driven by the SAME common
    increments as the particle run:
    Xbar_{m+1} = Xbar_m + h (ubar(t_m) + b(t_m)) + sqrt(h) sigma rho Z0_{m+1}."""
    common = np.asarray(common, dtype=float).reshape(-1)
    M = grid.steps_M
    if common.shape != (M,):
        raise ValueError(f"common increments shaped {common.shape}, expected ({M},)")
    h = grid.step_h
    sqrt_h = np.sqrt(h)
    load = params.sigma * params.rho
    ubar = params.control.population_rate
    b = params.liquidity_b

    path = np.empty(M + 1)
    path[0] = xbar0
    for m in range(M):
        t = grid.nodes[m]
        path[m + 1] = path[m] + h * (ubar(t) + b(t)) + sqrt_h * load * common[m]
    return path


# ---------------------------------------------------------------------------
# Fixed-step RK4 for control-coefficient ODE schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OdeSystem:
    dimension: int
    rhs: Callable[[float, np.ndarray], np.ndarray]


def rk4_solve(system: OdeSystem, t0: float, y0, t1: float, steps: int):
    """Classical RK4 with fixed step (t1 - t0) / steps.

    Backward integration (t1 < t0) works via negative steps, for
    terminal-condition Riccati-type systems.  Returns (ts, ys) with ys of
    shape (steps + 1, dimension).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if t1 == t0:
        raise ValueError("t1 must differ from t0")
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    if y.shape != (system.dimension,):
        raise ValueError(f"y0 shaped {y.shape}, expected ({system.dimension},)")
    h = (t1 - t0) / steps
    ts = t0 + h * np.arange(steps + 1)
    ys = np.empty((steps + 1, system.dimension))
    ys[0] = y
    for k in range(steps):
        t = ts[k]
        k1 = np.asarray(system.rhs(t, y), dtype=float)
        k2 = np.asarray(system.rhs(t + h / 2, y + h / 2 * k1), dtype=float)
        k3 = np.asarray(system.rhs(t + h / 2, y + h / 2 * k2), dtype=float)
        k4 = np.asarray(system.rhs(t + h, y + h * k3), dtype=float)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise ValueError(f"non-finite right-hand side near t={t}")
        ys[k + 1] = y
    return ts, ys


def load_schedule_csv(path) -> Schedule:
    """Load a two-column (t, value) CSV as a linearly interpolated schedule."""
    ts, vs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                t, v = float(row[0]), float(row[1])
            except (IndexError, ValueError):
                continue  # header line
            ts.append(t)
            vs.append(v)
    if len(ts) < 1:
        raise ValueError(f"no (t, value) rows found in {path}")
    ts_arr = np.asarray(ts)
    vs_arr = np.asarray(vs)
    order = np.argsort(ts_arr)
    ts_arr, vs_arr = ts_arr[order], vs_arr[order]
    return lambda t: float(np.interp(t, ts_arr, vs_arr))
