"""Particle-method simulation and convergence-analysis harness for
mean-field SDEs with common noise."""

from .core import (
    EmpiricalMeasure,
    ModelSpec,
    NoiseIncrements,
    RecordMode,
    RngStream,
    SimConfig,
    TimeGrid,
    empirical_mean,
    make_time_grid,
    moment_p,
    sample_increments,
)
from .harness import (
    ErrorReport,
    ExperimentPlan,
    density_sup_error,
    fit_loglog_slope,
    interbank_error,
    ou_strong_error,
    temporal_order_probe,
)
from .integrator import (
    NumericalAbort,
    ParticleState,
    TrajectoryBundle,
    euler_particle_step,
    simulate_coupled_pair,
    simulate_particle_system,
)
from .kde import KdeConfig, bandwidth, kde_evaluate, kernel_order5
from .models import (
    CondOuParams,
    ControlPolicy,
    InterbankParams,
    OdeSystem,
    affine_control,
    cond_ou_exact_path,
    cond_ou_exact_paths,
    cond_ou_model,
    cond_ou_true_density,
    interbank_model,
    macro_state_path,
    rk4_solve,
)
from .wasserstein import WassersteinOrder, wp_1d, wp_assignment, wp_pairing_bound

__version__ = "0.1.0"
