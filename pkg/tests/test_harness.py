import numpy as np
import pytest

from mkvsim.core import (
    RngStream,
    SimConfig,
    make_time_grid,
    substream_id,
)
from mkvsim.harness import (
    EXPERIMENT_SLOTS,
    ErrorReport,
    ExperimentPlan,
    additive_probe,
    density_sup_error,
    fit_loglog_slope,
    gbm_probe,
    interbank_error,
    ou_strong_error,
    temporal_order_probe,
)
from mkvsim.integrator import (
    simulate_coupled_pair,
    simulate_particle_system,
    write_trajectory_dump,
    read_trajectory_dump,
)
from mkvsim.models import (
    CondOuParams,
    InterbankParams,
    cond_ou_exact_paths,
    cond_ou_model,
    interbank_model,
    macro_state_path,
)

GRID = make_time_grid(1.0, 100)


def small_plan(n_values, R=4, seed=100, grid=GRID):
    return ExperimentPlan(n_values=n_values, replications_R=R, seed=seed, grid=grid)


class TestFitLoglogSlope:
    def test_exact_power_law(self):
        pairs = [(n, 3.7 * n**-0.5) for n in (10, 100, 1000, 5000)]
        slope, intercept = fit_loglog_slope(pairs)
        assert slope == pytest.approx(-0.5, abs=1e-12)
        assert intercept == pytest.approx(np.log(3.7), abs=1e-12)

    def test_constant_values(self):
        slope, _ = fit_loglog_slope([(1, 2.0), (10, 2.0), (100, 2.0)])
        assert slope == pytest.approx(0.0, abs=1e-14)

    def test_two_point_line(self):
        slope, _ = fit_loglog_slope([(1, 2.0), (4, 1.0)])
        assert slope == pytest.approx(np.log(0.5) / np.log(4), abs=1e-14)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            fit_loglog_slope([(1, 1.0), (2, 0.0)])
        with pytest.raises(ValueError):
            fit_loglog_slope([(1, 1.0)])


class TestErrorReportCsv:
    def test_round_trip(self, tmp_path):
        report = ErrorReport("demo", [(64, 0.125, 0.01), (128, 0.0625, 0.005)], -1.0, 2.5)
        path = tmp_path / "demo.csv"
        report.to_csv(path)
        back = ErrorReport.from_csv(path)
        assert back.experiment_id == "demo"
        assert back.pairs == report.pairs
        assert back.slope == report.slope
        assert back.intercept == report.intercept

    def test_rerun_is_byte_stable(self, tmp_path):
        plan = small_plan([64, 128], R=2, seed=7)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        ou_strong_error(plan, CondOuParams(dim_d=1)).to_csv(a)
        ou_strong_error(plan, CondOuParams(dim_d=1)).to_csv(b)
        assert a.read_bytes() == b.read_bytes()


class TestOuStrongError:
    def test_degenerate_noise_gives_zero_error(self):
        plan = small_plan([8, 16], R=2)
        report = ou_strong_error(plan, CondOuParams(dim_d=1, sigma=0.0, sigma0=0.0))
        assert report.degenerate
        for _, err, _ in report.pairs:
            assert err == 0.0

    def test_errors_positive_and_trending_down(self):
        plan = small_plan([64, 256, 1024], R=4, seed=21)
        report = ou_strong_error(plan, CondOuParams(dim_d=2))
        errs = [e for _, e, _ in report.pairs]
        assert all(e > 0 for e in errs)
        assert errs[-1] < errs[0]
        assert report.slope < 0

    def test_cells_recomputable_in_isolation(self):
        # replaying one (N, j) cell with its injective stream id reproduces
        # the full-run contribution bit-exactly
        plan = small_plan([64, 128], R=2, seed=33)
        params = CondOuParams(dim_d=1)
        report = ou_strong_error(plan, params)
        model = cond_ou_model(params)
        slot = EXPERIMENT_SLOTS["ou_strong"]
        for n_idx, N in enumerate(plan.n_values):
            sq = []
            for j in range(plan.replications_R):
                stream = RngStream(plan.seed, substream_id(slot, n_idx, j))
                config = SimConfig(model=model, grid=plan.grid, particles_N=N, seed=plan.seed)
                bundle, ref = simulate_coupled_pair(
                    config,
                    lambda i, c, g, X0: cond_ou_exact_paths(params, i, c, g),
                    stream,
                )
                sup = np.linalg.norm(bundle.particle_paths[:, 1:, :] - ref[:, 1:, :], axis=2).max(axis=1)
                sq.append(np.mean(sup**2))
            assert np.sqrt(np.mean(sq)) == report.pairs[n_idx][1]

    def test_error_recomputable_from_dump(self, tmp_path):
        # the documented error formula applied to dumped trajectories
        # reproduces the in-memory value exactly
        params = CondOuParams(dim_d=1)
        model = cond_ou_model(params)
        config = SimConfig(model=model, grid=GRID, particles_N=32, seed=5)
        stream = RngStream(5, substream_id(EXPERIMENT_SLOTS["ou_strong"], 0, 0))
        bundle, ref = simulate_coupled_pair(
            config, lambda i, c, g, X0: cond_ou_exact_paths(params, i, c, g), stream
        )
        live = np.linalg.norm(bundle.particle_paths[:, 1:, :] - ref[:, 1:, :], axis=2).max(axis=1)
        dump = tmp_path / "cell.mkv"
        write_trajectory_dump(bundle, dump)
        _, paths, _ = read_trajectory_dump(dump)
        replayed = np.linalg.norm(paths[:, 1:, :] - ref[:, 1:, :], axis=2).max(axis=1)
        assert np.array_equal(np.mean(live**2), np.mean(replayed**2))

    def test_threading_does_not_change_results(self):
        plan = small_plan([64, 128], R=3, seed=44)
        params = CondOuParams(dim_d=2)
        serial = ou_strong_error(plan, params, threads=1)
        parallel = ou_strong_error(plan, params, threads=8)
        assert serial.pairs == parallel.pairs
        assert serial.slope == parallel.slope

    def test_doubling_replications_is_stable(self):
        plan_r = small_plan([128], R=6, seed=55)
        plan_2r = small_plan([128], R=12, seed=55)
        params = CondOuParams(dim_d=1)
        a = ou_strong_error(plan_r, params).pairs[0]
        b = ou_strong_error(plan_2r, params).pairs[0]
        pooled = np.hypot(a[2], b[2])
        assert abs(a[1] - b[1]) < 3 * pooled


class TestDensitySupError:
    def test_requires_dimension_one(self):
        with pytest.raises(ValueError):
            density_sup_error(small_plan([16], R=2), CondOuParams(dim_d=2))

    def test_no_common_noise_still_converges(self):
        plan = small_plan([64, 128, 256, 512], R=4, seed=66)
        report = density_sup_error(plan, CondOuParams(dim_d=1, sigma0=0.0))
        assert report.slope < 0
        assert all(e > 0 for _, e, _ in report.pairs)

    def test_seed_consistency_within_pooled_stderr(self):
        params = CondOuParams(dim_d=1)
        a = density_sup_error(small_plan([256], R=10, seed=1), params).pairs[0]
        b = density_sup_error(small_plan([256], R=10, seed=2), params).pairs[0]
        assert a[1] != b[1]
        assert abs(a[1] - b[1]) < 3 * np.hypot(a[2], b[2])


class TestInterbankError:
    def test_rho_one_error_vanishes(self):
        plan = small_plan([16, 64], R=2, seed=77)
        report = interbank_error(plan, InterbankParams(rho=1.0))
        assert report.degenerate
        for _, err, _ in report.pairs:
            assert err < 1e-10

    def test_residual_is_averaged_idiosyncratic_walk(self):
        # instrument one replication: the gap between particle mean and
        # macro path equals sigma sqrt(1-rho^2) times the averaged
        # idiosyncratic Brownian path, node by node
        params = InterbankParams()
        model = interbank_model(params)
        config = SimConfig(model=model, grid=GRID, particles_N=64, seed=9)
        bundle, idio, common = simulate_particle_system(
            config, RngStream(9, 0), _capture_increments=True
        )
        macro = macro_state_path(params, common[:, 0], GRID, xbar0=0.0)
        gap = bundle.mean_path[:, 0] - macro
        sqrt_h = np.sqrt(GRID.step_h)
        avg_walk = np.concatenate([[0.0], np.cumsum(sqrt_h * idio[:, :, 0].mean(axis=0))])
        expected = params.sigma * np.sqrt(1 - params.rho**2) * avg_walk
        assert np.allclose(gap, expected, atol=1e-10)

    def test_slope_near_minus_half(self):
        plan = small_plan([64, 256, 1024], R=6, seed=88)
        report = interbank_error(plan, InterbankParams())
        assert -0.75 < report.slope < -0.25


class TestTemporalOrderProbe:
    def test_deterministic_drift_is_first_order(self):
        from mkvsim.harness import linear_drift_probe

        report = temporal_order_probe(
            linear_drift_probe(), [2.0**-k for k in range(4, 10)], replications_R=2, samples=8
        )
        assert 0.9 <= report.slope <= 1.1

    def test_gbm_is_half_order(self):
        report = temporal_order_probe(gbm_probe(), [2.0**-k for k in range(4, 10)], seed=3)
        assert 0.4 <= report.slope <= 0.6

    def test_additive_noise_is_exact(self):
        report = temporal_order_probe(additive_probe(), [2.0**-k for k in range(4, 8)], seed=4)
        assert report.degenerate
        assert np.isnan(report.slope)

    def test_rejects_bad_h(self):
        with pytest.raises(ValueError):
            temporal_order_probe(gbm_probe(), [0.5, 2.0])
