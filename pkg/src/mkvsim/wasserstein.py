"""p-Wasserstein distances between equal-size uniform empirical measures.

Three routes: exact sorted pairing in d=1, exact optimal assignment for
small clouds in any dimension, and the index-wise pairing upper bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import EmpiricalMeasure

__all__ = ["WassersteinOrder", "wp_1d", "wp_assignment", "wp_pairing_bound"]

P_MAX = 16.0
EXACT_SOLVE_CAP = 512  # assignment solve refuses larger clouds


@dataclass(frozen=True)
class WassersteinOrder:
    p: float = 2.0

    def __post_init__(self):
        if not (1.0 <= self.p <= P_MAX):
            raise ValueError(f"Wasserstein order p must lie in [1, {P_MAX}], got {self.p}")


def _order(p) -> float:
    if isinstance(p, WassersteinOrder):
        return p.p
    return WassersteinOrder(float(p)).p


def _check_pair(x: EmpiricalMeasure, y: EmpiricalMeasure):
    if x.count_N != y.count_N:
        raise ValueError(f"cloud sizes differ: {x.count_N} vs {y.count_N}")
    if x.dim_d != y.dim_d:
        raise ValueError(f"cloud dimensions differ: {x.dim_d} vs {y.dim_d}")


def wp_1d(x_cloud: EmpiricalMeasure, y_cloud: EmpiricalMeasure, p=2.0) -> float:
    """Exact W_p between two 1-d clouds of equal size via monotone pairing."""
    _check_pair(x_cloud, y_cloud)
    if x_cloud.dim_d != 1:
        raise ValueError("wp_1d requires one-dimensional clouds")
    pw = _order(p)
    xs = np.sort(x_cloud.points[:, 0])
    ys = np.sort(y_cloud.points[:, 0])
    return float(np.mean(np.abs(xs - ys) ** pw) ** (1.0 / pw))


def wp_assignment(x_cloud: EmpiricalMeasure, y_cloud: EmpiricalMeasure, p=2.0) -> float:
    """Exact W_p by minimizing over assignments of x-atoms to y-atoms."""
    _check_pair(x_cloud, y_cloud)
    n = x_cloud.count_N
    if n > EXACT_SOLVE_CAP:
        raise ValueError(f"exact assignment capped at N={EXACT_SOLVE_CAP}, got N={n}")
    pw = _order(p)
    diff = x_cloud.points[:, None, :] - y_cloud.points[None, :, :]
    cost = np.linalg.norm(diff, axis=2) ** pw
    rows, cols = linear_sum_assignment(cost)
    return float((cost[rows, cols].sum() / n) ** (1.0 / pw))


def wp_pairing_bound(x_cloud: EmpiricalMeasure, y_cloud: EmpiricalMeasure, p=2.0) -> float:
    """Index-wise coupling cost; an upper bound on the exact distance."""
    _check_pair(x_cloud, y_cloud)
    pw = _order(p)
    dists = np.linalg.norm(x_cloud.points - y_cloud.points, axis=1)
    return float(np.mean(dists**pw) ** (1.0 / pw))
