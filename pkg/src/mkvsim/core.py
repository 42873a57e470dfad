"""Foundational types: time grids, model coefficients, particle clouds,
noise increments and deterministic random-number streams.

Everything here is immutable after construction except :class:`RngStream`,
which is the single stateful object and is never shared between workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtri

__all__ = [
    "TimeGrid",
    "ModelSpec",
    "EmpiricalMeasure",
    "NoiseIncrements",
    "RngStream",
    "RecordMode",
    "SimConfig",
    "make_time_grid",
    "sample_increments",
    "empirical_mean",
    "moment_p",
    "substream_id",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_m = m*h on [0, T] with h = T/M."""

    horizon_T: float
    steps_M: int
    step_h: float
    nodes: np.ndarray  # shape (M+1,)

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))


def make_time_grid(T: float, M: int) -> TimeGrid:
    """Build the uniform grid with M steps over [0, T]."""
    if not (T > 0):
        raise ValueError(f"horizon T must be positive, got {T}")
    if not (isinstance(M, (int, np.integer)) and M >= 1):
        raise ValueError(f"step count M must be a positive integer, got {M}")
    h = T / M
    nodes = np.arange(M + 1, dtype=float) * h
    # guard against accumulated representation error at the endpoint
    nodes[-1] = T
    return TimeGrid(horizon_T=float(T), steps_M=int(M), step_h=h, nodes=nodes)


class EmpiricalMeasure:
    """Uniform empirical measure on N points in R^d.

    The mean is computed lazily and cached, so coefficient functions that
    only read the mean cost O(N) once per step rather than once per
    particle.  Reductions rely on numpy's pairwise summation, which is a
    fixed order independent of any thread scheduling above it.
    """

    __slots__ = ("points", "_mean")

    def __init__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.ndim != 2:
            raise ValueError(f"points must be an N x d array, got shape {pts.shape}")
        if pts.shape[0] < 1:
            raise ValueError("empirical measure needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("empirical measure contains non-finite entries")
        self.points = pts
        self._mean = None

    @property
    def count_N(self) -> int:
        return self.points.shape[0]

    @property
    def dim_d(self) -> int:
        return self.points.shape[1]

    def mean(self) -> np.ndarray:
        if self._mean is None:
            self._mean = self.points.mean(axis=0)
        return self._mean

    def moment(self, p: float) -> float:
        return moment_p(self, p)


def empirical_mean(mu: EmpiricalMeasure) -> np.ndarray:
    """Coordinatewise mean of the cloud (fixed pairwise summation order)."""
    return mu.mean()


def moment_p(mu: EmpiricalMeasure, p: float) -> float:
    """((1/N) sum_i |x_i|^p)^(1/p) with the Euclidean norm."""
    if p < 1:
        raise ValueError(f"moment order p must be >= 1, got {p}")
    norms = np.linalg.norm(mu.points, axis=1)
    return float(np.mean(norms**p) ** (1.0 / p))


# Coefficient functions are vectorized over the cloud: they receive the full
# (N, d) state array plus the empirical measure and return either an (N, d)
# drift or a diffusion of shape (d, q) (shared by all particles) or (N, d, q).
Coefficient = Callable[[float, np.ndarray, EmpiricalMeasure], np.ndarray]


@dataclass(frozen=True)
class ModelSpec:
    """Coefficient triple (drift, idiosyncratic diffusion, common diffusion)
    over (time, state, empirical measure), with regularity metadata."""

    dim_state_d: int
    dim_noise_q: int
    drift: Coefficient
    idio_diffusion: Coefficient
    common_diffusion: Coefficient
    holder_rho: float = 1.0
    lipschitz_L: Optional[float] = None

    def __post_init__(self):
        if self.dim_state_d < 1 or self.dim_noise_q < 1:
            raise ValueError("state and noise dimensions must be positive")
        if not (0 < self.holder_rho <= 1):
            raise ValueError(f"holder_rho must lie in (0, 1], got {self.holder_rho}")


@dataclass(frozen=True)
class NoiseIncrements:
    """One step worth of re-normalized increments: per-particle idiosyncratic
    draws and a single common draw shared by every particle."""

    idio_Z: np.ndarray  # (N, q)
    common_Z0: np.ndarray  # (q,)


class RngStream:
    """Counter-based deterministic normal stream.

    Built on Philox keyed by (seed, stream_id): distinct keys give
    statistically independent streams, identical keys give bit-identical
    sequences regardless of worker-thread count.  Normals come from the
    inverse-CDF transform of the counter-based uniforms.
    """

    __slots__ = ("seed", "stream_id", "counter", "_gen")

    def __init__(self, seed: int, stream_id: int = 0):
        if stream_id < 0:
            raise ValueError("stream_id must be nonnegative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.counter = 0
        key = np.array(
            [self.seed & 0xFFFFFFFFFFFFFFFF, self.stream_id & 0xFFFFFFFFFFFFFFFF],
            dtype=np.uint64,
        )
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def normals(self, shape) -> np.ndarray:
        """Standard-normal draws via inverse CDF of Philox uniforms."""
        u = self._gen.random(shape)
        # map [0, 1) affinely into (0, 1) so ndtri never sees an endpoint
        z = ndtri(u * (1.0 - 2.0**-53) + 2.0**-54)
        self.counter += int(np.size(z))
        return z

    def spawn(self, substream: int) -> "RngStream":
        """Derive an independent stream; the parent state is untouched."""
        return RngStream(self.seed, substream_id(self.stream_id, substream))


def substream_id(*indices: int) -> int:
    """Pack a small tuple of nonnegative indices into one injective 64-bit id.

    Layout: 16 bits per index, up to four indices. Raises if any index
    overflows its field, so collisions are impossible rather than unlikely.
    """
    if not 1 <= len(indices) <= 4:
        raise ValueError("substream_id takes 1 to 4 indices")
    packed = 0
    for idx in indices:
        if not (0 <= idx < 2**16):
            raise ValueError(f"substream index {idx} out of range [0, 65536)")
        packed = (packed << 16) | idx
    return packed


def sample_increments(stream: RngStream, N: int, q: int) -> NoiseIncrements:
    """Draw one step of increments: N x q idiosyncratic plus one shared
    q-vector, advancing the stream counter deterministically."""
    if N < 1 or q < 1:
        raise ValueError(f"invalid increment sizes N={N}, q={q}")
    idio = stream.normals((N, q))
    common = stream.normals(q)
    return NoiseIncrements(idio_Z=idio, common_Z0=common)


class RecordMode(str, Enum):
    FULL_TRAJECTORIES = "full_trajectories"
    TERMINAL_ONLY = "terminal_only"
    RUNNING_SUP_ERROR = "running_sup_error"


def _default_initial_sampler(stream: RngStream, N: int, d: int) -> np.ndarray:
    # default initial condition: the deterministic point mass at 0
    return np.zeros((N, d))


@dataclass(frozen=True)
class SimConfig:
    """Full description of one particle-system run."""

    model: ModelSpec
    grid: TimeGrid
    particles_N: int
    seed: int
    replications_R: int = 1
    record_mode: RecordMode = RecordMode.FULL_TRAJECTORIES
    initial_sampler: Callable[[RngStream, int, int], np.ndarray] = field(
        default=_default_initial_sampler
    )

    def __post_init__(self):
        if self.particles_N < 1:
            raise ValueError("particles_N must be >= 1")
        if self.replications_R < 1:
            raise ValueError("replications_R must be >= 1")
