"""Convergence experiments: strong L2 error of the particle method against
the exact conditional OU solution, kernel density sup-error, interbank
mean-field error, a temporal-order probe, and log-log slope fitting."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    RecordMode,
    RngStream,
    SimConfig,
    TimeGrid,
    make_time_grid,
    substream_id,
)
from .integrator import simulate_coupled_pair, simulate_particle_system
from .kde import KdeConfig, bandwidth, kde_evaluate
from .models import (
    CondOuParams,
    InterbankParams,
    cond_ou_exact_paths,
    cond_ou_model,
    cond_ou_true_density,
    interbank_model,
    macro_state_path,
)

__all__ = [
    "ExperimentPlan",
    "ErrorReport",
    "ProbeModel",
    "gbm_probe",
    "linear_drift_probe",
    "additive_probe",
    "fit_loglog_slope",
    "ou_strong_error",
    "density_sup_error",
    "interbank_error",
    "temporal_order_probe",
]

# Stream-id name space: one slot per experiment so no two experiments can
# ever consume overlapping draw sequences under the same seed.
EXPERIMENT_SLOTS = {
    "ou_strong": 1,
    "ou_density": 2,
    "interbank": 3,
    "temporal": 4,
    "simulate": 5,
}

DEFAULT_N_VALUES = tuple(2**k for k in range(6, 17))


@dataclass(frozen=True)
class ExperimentPlan:
    """Shared knobs of a convergence run: particle counts, replication
    count, seed and the time grid."""

    n_values: Sequence[int] = DEFAULT_N_VALUES
    replications_R: int = 30
    seed: int = 0
    grid: TimeGrid = field(default_factory=lambda: make_time_grid(1.0, 100))
    wasserstein_p: float = 2.0

    def __post_init__(self):
        ns = tuple(int(n) for n in self.n_values)
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("n_values must be strictly increasing")
        if self.replications_R < 2:
            raise ValueError("slope fitting needs at least 2 replications")
        object.__setattr__(self, "n_values", ns)


@dataclass
class ErrorReport:
    """Per-abscissa errors with their fitted log-log slope.

    ``pairs`` holds (abscissa, error, per-replication standard error).
    ``degenerate`` flags runs whose errors sat at machine-precision scale,
    where a slope fit would be meaningless.
    """

    experiment_id: str
    pairs: List[Tuple[float, float, float]]
    slope: float
    intercept: float
    degenerate: bool = False

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("experiment,abscissa,error,stderr\n")
            for a, e, s in self.pairs:
                fh.write(f"{self.experiment_id},{_fmt(a)},{_fmt(e)},{_fmt(s)}\n")
            fh.write(f"# slope={_fmt(self.slope)}\n")
            fh.write(f"# intercept={_fmt(self.intercept)}\n")
            if self.degenerate:
                fh.write("# degenerate=1\n")

    @classmethod
    def from_csv(cls, path) -> "ErrorReport":
        pairs, slope, intercept, degenerate = [], math.nan, math.nan, False
        experiment = ""
        with open(path) as fh:
            header = fh.readline().strip()
            if header != "experiment,abscissa,error,stderr":
                raise ValueError(f"unexpected header {header!r} in {path}")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, value = line.lstrip("# ").partition("=")
                    if key == "slope":
                        slope = float(value)
                    elif key == "intercept":
                        intercept = float(value)
                    elif key == "degenerate":
                        degenerate = bool(int(value))
                    continue
                experiment, a, e, s = line.split(",")
                pairs.append((float(a), float(e), float(s)))
        if not pairs:
            raise ValueError(f"no data rows in {path}")
        return cls(experiment, pairs, slope, intercept, degenerate)


def _fmt(x: float) -> str:
    if isinstance(x, (int, np.integer)) or (isinstance(x, float) and x.is_integer() and abs(x) < 2**53):
        return str(int(x))
    return repr(float(x))


def fit_loglog_slope(pairs: Sequence[Tuple[float, float]]) -> Tuple[float, float]:
    """Ordinary least squares of log(value) on log(abscissa)."""
    if len(pairs) < 2:
        raise ValueError("slope fit needs at least 2 pairs")
    xs = np.array([p[0] for p in pairs], dtype=float)
    ys = np.array([p[1] for p in pairs], dtype=float)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit requires strictly positive pairs")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def _run_cells(n_cells: int, worker: Callable[[int], np.ndarray], threads: int) -> list:
    """Evaluate independent cells, writing results by fixed index so the
    output is identical for any worker count."""
    results = [None] * n_cells
    if threads <= 1:
        for k in range(n_cells):
            results[k] = worker(k)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for k, value in zip(range(n_cells), pool.map(worker, range(n_cells))):
                results[k] = value
    return results


def _aggregate(experiment_id: str, abscissas, sq_errors: np.ndarray) -> ErrorReport:
    """Combine per-replication squared errors (rows = abscissa, cols = rep)
    into the reported RMS error and fitted slope."""
    eps = np.sqrt(sq_errors.mean(axis=1))
    per_rep = np.sqrt(sq_errors)
    stderr = per_rep.std(axis=1, ddof=1) / np.sqrt(sq_errors.shape[1])
    pairs = [(float(a), float(e), float(s)) for a, e, s in zip(abscissas, eps, stderr)]
    degenerate = bool(np.all(eps < 1e-12))
    if degenerate or len(pairs) < 2:
        slope, intercept = math.nan, math.nan
    else:
        slope, intercept = fit_loglog_slope([(a, e) for a, e, _ in pairs])
    return ErrorReport(experiment_id, pairs, slope, intercept, degenerate)


# ---------------------------------------------------------------------------
# Experiment 1: strong L2 error, particle scheme vs exact OU solution
# ---------------------------------------------------------------------------


def ou_strong_error(
    plan: ExperimentPlan, params: CondOuParams, threads: int = 1
) -> ErrorReport:
    """eps_N^2 = (1/R) sum_j (1/N) sum_i max_m |particle - exact|^2 on
    synchronously coupled runs, one independent stream per (N, j) cell."""
    model = cond_ou_model(params)
    R = plan.replications_R
    slot = EXPERIMENT_SLOTS["ou_strong"]

    def worker(cell: int) -> float:
        n_idx, j = divmod(cell, R)
        N = plan.n_values[n_idx]
        stream = RngStream(plan.seed, substream_id(slot, n_idx, j))
        config = SimConfig(model=model, grid=plan.grid, particles_N=N, seed=plan.seed)
        bundle, ref = simulate_coupled_pair(
            config, lambda idio, common, grid, X0: cond_ou_exact_paths(params, idio, common, grid), stream
        )
        diff = bundle.particle_paths - ref
        # sup over nodes m = 1..M of the euclidean pathwise gap, per particle
        sup = np.linalg.norm(diff[:, 1:, :], axis=2).max(axis=1)
        return float(np.mean(sup**2))

    cells = _run_cells(len(plan.n_values) * R, worker, threads)
    sq = np.array(cells, dtype=float).reshape(len(plan.n_values), R)
    return _aggregate("ou_strong", plan.n_values, sq)


# ---------------------------------------------------------------------------
# Experiment 2: kernel density sup-error against the exact conditional law
# ---------------------------------------------------------------------------


def density_sup_error(
    plan: ExperimentPlan,
    params: CondOuParams,
    kde_config: Optional[KdeConfig] = None,
    threads: int = 1,
    scale_bandwidth_by_std: bool = False,
) -> ErrorReport:
    """E_N^2 = (1/R) sum_j max_x |kde_j(x) - truth_j(x)|^2 where the truth
    is the Gaussian conditional density at the replication's realized
    common-noise endpoint; bandwidth N^{-1/13} per particle count.

    With ``scale_bandwidth_by_std`` the per-replication bandwidth is
    multiplied by the sample standard deviation of the centered terminal
    cloud.  The raw N^{-1/13} rule oversmooths this target badly (the
    bandwidth exceeds the density's own standard deviation for every
    reachable N), which floors the sup-error at its deterministic
    smoothing bias; the scaled variant restores the kernel's nominal
    convergence rate."""
    if params.dim_d != 1:
        raise ValueError("density experiment requires dimension 1")
    if kde_config is None:
        kde_config = KdeConfig(bandwidth_eta=1.0)
    model = cond_ou_model(params)
    T = plan.grid.horizon_T
    R = plan.replications_R
    slot = EXPERIMENT_SLOTS["ou_density"]
    grid_x = kde_config.grid()

    def worker(cell: int) -> float:
        n_idx, j = divmod(cell, R)
        N = plan.n_values[n_idx]
        stream = RngStream(plan.seed, substream_id(slot, n_idx, j))
        config = SimConfig(
            model=model,
            grid=plan.grid,
            particles_N=N,
            seed=plan.seed,
            record_mode=RecordMode.TERMINAL_ONLY,
        )
        bundle = simulate_particle_system(config, stream)
        samples = bundle.terminal_cloud.points[:, 0]
        eta = bandwidth(N, kde_config.kernel_order_l)
        if scale_bandwidth_by_std:
            eta *= float(np.std(samples, ddof=1))
        cfg_n = replace(kde_config, bandwidth_eta=eta)
        estimate = kde_evaluate(samples, cfg_n)
        w0 = float(bundle.common_path[-1, 0])
        truth = cond_ou_true_density(params, T, w0, grid_x)
        return float(np.max(np.abs(estimate - truth)) ** 2)

    cells = _run_cells(len(plan.n_values) * R, worker, threads)
    sq = np.array(cells, dtype=float).reshape(len(plan.n_values), R)
    return _aggregate("ou_density", plan.n_values, sq)


# ---------------------------------------------------------------------------
# Experiment 3: interbank mean-field error
# ---------------------------------------------------------------------------


def interbank_error(
    plan: ExperimentPlan, params: InterbankParams, threads: int = 1
) -> ErrorReport:
    """E_N^2 = (1/R) sum_j max_m |particle mean - macro state|^2 with the
    macro Euler path driven by the same common increments."""
    model = interbank_model(params)
    R = plan.replications_R
    slot = EXPERIMENT_SLOTS["interbank"]
    sqrt_h = np.sqrt(plan.grid.step_h)

    def worker(cell: int) -> float:
        n_idx, j = divmod(cell, R)
        N = plan.n_values[n_idx]
        stream = RngStream(plan.seed, substream_id(slot, n_idx, j))
        config = SimConfig(
            model=model,
            grid=plan.grid,
            particles_N=N,
            seed=plan.seed,
            record_mode=RecordMode.TERMINAL_ONLY,
        )
        bundle = simulate_particle_system(config, stream)
        common_z = np.diff(bundle.common_path[:, 0]) / sqrt_h
        macro = macro_state_path(params, common_z, plan.grid, xbar0=float(bundle.mean_path[0, 0]))
        gap = np.abs(bundle.mean_path[1:, 0] - macro[1:])
        return float(gap.max() ** 2)

    cells = _run_cells(len(plan.n_values) * R, worker, threads)
    sq = np.array(cells, dtype=float).reshape(len(plan.n_values), R)
    return _aggregate("interbank", plan.n_values, sq)


# ---------------------------------------------------------------------------
# Temporal-order probe on measure-free one-dimensional models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeModel:
    """Measure-free scalar SDE with a strong solution expressible from the
    terminal Brownian value, for checking the Euler scheme's h-order."""

    name: str
    drift: Callable[[float, np.ndarray], np.ndarray]
    diffusion: Callable[[float, np.ndarray], np.ndarray]
    exact_terminal: Callable[[float, float, np.ndarray], np.ndarray]
    x0: float = 1.0


def gbm_probe(sigma: float = 1.0, x0: float = 1.0) -> ProbeModel:
    """dX = sigma X dW; X_T = x0 exp(sigma W_T - sigma^2 T / 2)."""
    return ProbeModel(
        name="gbm",
        drift=lambda t, x: np.zeros_like(x),
        diffusion=lambda t, x: sigma * x,
        exact_terminal=lambda T, x0_, W: x0_ * np.exp(sigma * W - 0.5 * sigma**2 * T),
        x0=x0,
    )


def linear_drift_probe(rate: float = 1.0, x0: float = 1.0) -> ProbeModel:
    """dX = rate X dt (no noise); X_T = x0 e^{rate T}."""
    return ProbeModel(
        name="linear_drift",
        drift=lambda t, x: rate * x,
        diffusion=lambda t, x: np.zeros_like(x),
        exact_terminal=lambda T, x0_, W: x0_ * np.exp(rate * T) * np.ones_like(W),
        x0=x0,
    )


def additive_probe(mu: float = 0.5, sigma: float = 1.0, x0: float = 0.0) -> ProbeModel:
    """dX = mu dt + sigma dW; Euler is exact, errors sit at machine scale."""
    return ProbeModel(
        name="additive",
        drift=lambda t, x: np.full_like(x, mu),
        diffusion=lambda t, x: np.full_like(x, sigma),
        exact_terminal=lambda T, x0_, W: x0_ + mu * T + sigma * W,
        x0=x0,
    )


def temporal_order_probe(
    probe: ProbeModel,
    h_values: Sequence[float],
    replications_R: int = 4,
    samples: int = 4096,
    seed: int = 0,
    T: float = 1.0,
    threads: int = 1,
) -> ErrorReport:
    """Strong terminal error of the Euler scheme versus step size h, with
    the exact solution evaluated on the identical Brownian path."""
    hs = sorted(float(h) for h in h_values)
    if any(h <= 0 or h > T for h in hs):
        raise ValueError("h values must lie in (0, T]")
    slot = EXPERIMENT_SLOTS["temporal"]

    def worker(cell: int) -> float:
        h_idx, j = divmod(cell, replications_R)
        h = hs[h_idx]
        M = int(round(T / h))
        stream = RngStream(seed, substream_id(slot, h_idx, j))
        Z = stream.normals((samples, M))
        sqrt_h = np.sqrt(T / M)
        X = np.full(samples, probe.x0, dtype=float)
        t = 0.0
        for m in range(M):
            X = X + (T / M) * probe.drift(t, X) + sqrt_h * probe.diffusion(t, X) * Z[:, m]
            t = (m + 1) * (T / M)
        W_T = sqrt_h * Z.sum(axis=1)
        exact = probe.exact_terminal(T, probe.x0, W_T)
        return float(np.mean((X - exact) ** 2))

    cells = _run_cells(len(hs) * replications_R, worker, threads)
    sq = np.array(cells, dtype=float).reshape(len(hs), replications_R)
    return _aggregate(f"temporal_{probe.name}", hs, sq)
