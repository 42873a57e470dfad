"""Order-5 Gaussian-based kernel density estimation on a uniform grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["KdeConfig", "kernel_order5", "bandwidth", "kde_evaluate"]

KERNEL_ORDER = 5
TAIL_CUTOFF = 12.0  # kernel values beyond this are < 1e-25
_CHUNK = 4096  # samples per summation block, bounds the scratch matrix


@dataclass(frozen=True)
class KdeConfig:
    bandwidth_eta: float
    grid_lo: float = -3.0
    grid_hi: float = 3.0
    grid_points: int = 601
    kernel_order_l: int = KERNEL_ORDER

    def __post_init__(self):
        if self.bandwidth_eta <= 0:
            raise ValueError("bandwidth must be positive")
        if self.grid_points < 2 or not self.grid_lo < self.grid_hi:
            raise ValueError("grid needs at least 2 points with lo < hi")
        if self.kernel_order_l != KERNEL_ORDER:
            raise ValueError(f"only the order-{KERNEL_ORDER} kernel is implemented")

    def grid(self) -> np.ndarray:
        return np.linspace(self.grid_lo, self.grid_hi, self.grid_points)


def kernel_order5(x) -> np.ndarray:
    """K(u) = (1/8)(15 - 10 u^2 + u^4) phi(u); moments 1..5 vanish.

    Higher-order kernels take negative values; no clipping is applied.
    Tails beyond |u| = 12 are truncated to zero.
    """
    u = np.asarray(x, dtype=float)
    u2 = u * u
    phi = np.exp(-0.5 * u2) / np.sqrt(2.0 * np.pi)
    out = 0.125 * (15.0 - 10.0 * u2 + u2 * u2) * phi
    out = np.where(np.abs(u) > TAIL_CUTOFF, 0.0, out)
    return out if out.ndim else float(out)


def bandwidth(N: int, l: int = KERNEL_ORDER) -> float:
    """Rate-optimal bandwidth N^{-1/(2(l+1)+1)}; N^{-1/13} for l = 5."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return float(N) ** (-1.0 / (2 * (l + 1) + 1))


def kde_evaluate(samples, config: KdeConfig) -> np.ndarray:
    """Evaluate (1/(N eta)) sum_i K((x - X_i)/eta) on the config grid.

    Direct summation, blocked over samples to keep memory flat; grids are
    hundreds of points and N stays at desk scale, so no FFT binning.
    """
    xs = np.asarray(samples, dtype=float).reshape(-1)
    if xs.size < 1:
        raise ValueError("kde needs at least one sample")
    eta = config.bandwidth_eta
    grid = config.grid()
    out = np.zeros_like(grid)
    for start in range(0, xs.size, _CHUNK):
        block = xs[start : start + _CHUNK]
        out += kernel_order5((grid[:, None] - block[None, :]) / eta).sum(axis=1)
    return out / (xs.size * eta)
