"""Euler particle stepper with shared common noise, simulation drivers and
the synchronously coupled reference run used for strong-error estimation."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .core import (
    EmpiricalMeasure,
    ModelSpec,
    NoiseIncrements,
    RecordMode,
    RngStream,
    SimConfig,
    TimeGrid,
    sample_increments,
)

__all__ = [
    "ParticleState",
    "TrajectoryBundle",
    "NumericalAbort",
    "euler_particle_step",
    "simulate_particle_system",
    "simulate_coupled_pair",
    "write_trajectory_dump",
    "read_trajectory_dump",
]


class NumericalAbort(RuntimeError):
    """Raised when a coefficient or state turns non-finite mid-run."""


@dataclass(frozen=True)
class ParticleState:
    step_index_m: int
    cloud: EmpiricalMeasure


@dataclass
class TrajectoryBundle:
    """Recorded output of one particle-system run.

    ``particle_paths`` is present only under full-trajectory recording;
    ``mean_path`` and ``common_path`` are always recorded (they are cheap
    and every experiment needs at least one of them).
    """

    grid: TimeGrid
    terminal_cloud: EmpiricalMeasure
    common_path: np.ndarray  # (M+1, q), cumulative common noise
    mean_path: np.ndarray  # (M+1, d), empirical mean per node
    particle_paths: Optional[np.ndarray] = None  # (N, M+1, d)


def _drift_array(model: ModelSpec, t: float, X: np.ndarray, mu: EmpiricalMeasure) -> np.ndarray:
    b = np.asarray(model.drift(t, X, mu), dtype=float)
    N, d = X.shape
    if b.shape == (d,):
        b = np.broadcast_to(b, (N, d))
    if b.shape != (N, d):
        raise NumericalAbort(
            f"drift returned shape {b.shape}, expected ({N}, {d}) at t={t}"
        )
    return b


def _apply_diffusion(
    name: str,
    coeff,
    model: ModelSpec,
    t: float,
    X: np.ndarray,
    mu: EmpiricalMeasure,
    Z: np.ndarray,
) -> np.ndarray:
    """Evaluate a diffusion coefficient and contract it with increments Z.

    Z is (N, q) for idiosyncratic noise or (q,) for the shared common draw;
    the coefficient may return (d, q) shared across particles or (N, d, q).
    """
    N, d = X.shape
    q = model.dim_noise_q
    S = np.asarray(coeff(t, X, mu), dtype=float)
    if Z.ndim == 1:
        Z = np.broadcast_to(Z, (N, q))
    if S.shape == (d, q):
        out = Z @ S.T
    elif S.shape == (N, d, q):
        out = np.einsum("ndq,nq->nd", S, Z)
    else:
        raise NumericalAbort(
            f"{name} returned shape {S.shape}, expected ({d}, {q}) or ({N}, {d}, {q}) at t={t}"
        )
    return out


def euler_particle_step(
    state: ParticleState, model: ModelSpec, grid: TimeGrid, noise: NoiseIncrements
) -> ParticleState:
    """One Euler step of the interacting particle system.

    All coefficients are evaluated on the pre-step cloud and its empirical
    measure; the common draw is applied identically to every particle.
    """
    m = state.step_index_m
    if m >= grid.steps_M:
        raise ValueError(f"cannot step past the grid end (m={m}, M={grid.steps_M})")
    X = state.cloud.points
    N, d = X.shape
    q = model.dim_noise_q
    if noise.idio_Z.shape != (N, q):
        raise ValueError(
            f"idiosyncratic noise shaped {noise.idio_Z.shape}, expected ({N}, {q})"
        )
    if noise.common_Z0.shape != (q,):
        raise ValueError(f"common noise shaped {noise.common_Z0.shape}, expected ({q},)")

    t = grid.nodes[m]
    h = grid.step_h
    sqrt_h = np.sqrt(h)
    mu = state.cloud

    b = _drift_array(model, t, X, mu)
    idio = _apply_diffusion("idio_diffusion", model.idio_diffusion, model, t, X, mu, noise.idio_Z)
    common = _apply_diffusion(
        "common_diffusion", model.common_diffusion, model, t, X, mu, noise.common_Z0
    )
    X_next = X + h * b + sqrt_h * idio + sqrt_h * common

    if not np.all(np.isfinite(X_next)):
        bad = np.argwhere(~np.isfinite(X_next))
        i = int(bad[0, 0])
        raise NumericalAbort(f"non-finite state after step at t={t} (particle {i})")
    return ParticleState(step_index_m=m + 1, cloud=EmpiricalMeasure(X_next))


def simulate_particle_system(
    config: SimConfig,
    stream: RngStream,
    _capture_increments: bool = False,
):
    """Run the full particle system over the configured grid.

    Deterministic in (config, stream).  With ``_capture_increments`` the
    consumed draws are returned alongside the bundle, for synchronous
    coupling against a reference solution.
    """
    model, grid = config.model, config.grid
    N, d, q = config.particles_N, model.dim_state_d, model.dim_noise_q
    M = grid.steps_M

    X0 = np.asarray(config.initial_sampler(stream, N, d), dtype=float)
    if X0.shape != (N, d):
        raise ValueError(f"initial sampler returned shape {X0.shape}, expected ({N}, {d})")
    state = ParticleState(0, EmpiricalMeasure(X0))

    record_full = config.record_mode == RecordMode.FULL_TRAJECTORIES
    paths = np.empty((N, M + 1, d)) if record_full else None
    if record_full:
        paths[:, 0, :] = X0
    mean_path = np.empty((M + 1, d))
    mean_path[0] = state.cloud.mean()
    common_path = np.zeros((M + 1, q))

    idio_all = np.empty((N, M, q)) if _capture_increments else None
    common_all = np.empty((M, q)) if _capture_increments else None

    sqrt_h = np.sqrt(grid.step_h)
    for m in range(M):
        noise = sample_increments(stream, N, q)
        if _capture_increments:
            idio_all[:, m, :] = noise.idio_Z
            common_all[m] = noise.common_Z0
        state = euler_particle_step(state, model, grid, noise)
        common_path[m + 1] = common_path[m] + sqrt_h * noise.common_Z0
        mean_path[m + 1] = state.cloud.mean()
        if record_full:
            paths[:, m + 1, :] = state.cloud.points

    bundle = TrajectoryBundle(
        grid=grid,
        terminal_cloud=state.cloud,
        common_path=common_path,
        mean_path=mean_path,
        particle_paths=paths,
    )
    if _capture_increments:
        return bundle, idio_all, common_all
    return bundle


# A reference generator maps the exact increments consumed by the particle
# run to exact-solution paths: (idio (N, M, q), common (M, q), grid, X0) -> (N, M+1, d).
ReferenceGenerator = Callable[[np.ndarray, np.ndarray, TimeGrid, np.ndarray], np.ndarray]


def simulate_coupled_pair(
    config: SimConfig, reference: ReferenceGenerator, stream: RngStream
) -> Tuple[TrajectoryBundle, np.ndarray]:
    """Run the particle system and the reference solution on identical noise.

    The particle run is forced to full-trajectory recording so pathwise sup
    errors can be formed; the reference receives the very same (Z^i, Z^0)
    sequences (synchronous coupling).
    """
    from dataclasses import replace

    coupled_config = replace(config, record_mode=RecordMode.FULL_TRAJECTORIES)
    bundle, idio, common = simulate_particle_system(
        coupled_config, stream, _capture_increments=True
    )
    X0 = bundle.particle_paths[:, 0, :]
    ref_paths = np.asarray(reference(idio, common, config.grid, X0), dtype=float)
    N, d = config.particles_N, config.model.dim_state_d
    expected = (N, config.grid.steps_M + 1, d)
    if ref_paths.shape != expected:
        raise ValueError(
            f"reference generator returned shape {ref_paths.shape}, expected {expected}"
        )
    return bundle, ref_paths


_MAGIC = b"MKV1"


def write_trajectory_dump(bundle: TrajectoryBundle, path) -> None:
    """Binary dump: magic 'MKV1', then (d, q, N, M) as little-endian uint32,
    T as little-endian float64, particle paths row-major, common path."""
    if bundle.particle_paths is None:
        raise ValueError("trajectory dump requires full-trajectory recording")
    N, _, d = bundle.particle_paths.shape
    M = bundle.grid.steps_M
    q = bundle.common_path.shape[1]
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<4I", d, q, N, M))
        fh.write(struct.pack("<d", bundle.grid.horizon_T))
        fh.write(np.ascontiguousarray(bundle.particle_paths, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(bundle.common_path, dtype="<f8").tobytes())


def read_trajectory_dump(path):
    """Inverse of :func:`write_trajectory_dump`; returns (grid, paths, common)."""
    from .core import make_time_grid

    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {_MAGIC!r}")
        d, q, N, M = struct.unpack("<4I", fh.read(16))
        (T,) = struct.unpack("<d", fh.read(8))
        paths = np.frombuffer(fh.read(N * (M + 1) * d * 8), dtype="<f8").reshape(N, M + 1, d)
        common = np.frombuffer(fh.read((M + 1) * q * 8), dtype="<f8").reshape(M + 1, q)
    return make_time_grid(T, M), paths, common
