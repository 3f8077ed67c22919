import numpy as np
import pytest

from enks.benchmarks import (LinearGaussianSpec, PendulumSpec, PopulationSpec,
                             ShearFrameSpec, build_damaged_frame,
                             build_linear_gaussian, build_pendulum,
                             build_population, build_shear_frame,
                             default_frame_spec, frame_truth_x0, kalman_oracle,
                             nu_from_noise_std, scalar_linear_gaussian,
                             tridiagonal_stiffness)
from enks.models import MeasurementSeries
from enks.rng import RngStream
from enks.sde import simulate_truth


class TestTridiagonalStiffness:
    def test_single_storey(self):
        assert np.array_equal(tridiagonal_stiffness([5.0], 1), [[5.0]])

    def test_two_storeys(self):
        K = tridiagonal_stiffness([2.0, 3.0], 2)
        assert np.array_equal(K, [[5.0, -3.0], [-3.0, 3.0]])

    def test_fifty_uniform(self):
        K = tridiagonal_stiffness([100.0] * 50, 50)
        diag = np.diag(K)
        assert np.all(diag[:-1] == 200.0) and diag[-1] == 100.0
        assert np.all(np.diag(K, 1) == -100.0)
        assert np.all(np.diag(K, -1) == -100.0)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            tridiagonal_stiffness([1.0, 0.0], 2)

    def test_symmetric_positive_definite(self):
        rng = np.random.default_rng(1)
        for dof in (1, 3, 10, 50):
            p = rng.uniform(10.0, 200.0, dof)
            K = tridiagonal_stiffness(p, dof)
            assert np.array_equal(K, K.T)
            assert np.all(np.linalg.eigvalsh(K) > 0)


class TestShearFrame:
    def test_augmented_dimensions(self):
        proc50, _ = build_shear_frame(default_frame_spec(50))
        assert proc50.n == 200
        proc20, _ = build_shear_frame(default_frame_spec(20))
        assert proc20.n == 80

    def test_equilibrium_with_zero_forcing(self):
        spec = default_frame_spec(4)
        proc, _ = build_shear_frame(spec, xi=0.0)
        x0 = frame_truth_x0(spec)
        x0[:8] = 0.0
        assert np.array_equal(proc.drift(x0, 0.3), np.zeros(16))

    def test_drift_linear_in_state_channels(self):
        # frozen parameters, zero forcing: doubling (u, v) doubles the drift
        spec = default_frame_spec(5)
        proc, _ = build_shear_frame(spec, xi=0.0)
        rng = np.random.default_rng(3)
        z = frame_truth_x0(spec)
        z[:10] = rng.standard_normal(10)
        z2 = z.copy()
        z2[:10] *= 2.0
        d1, d2 = proc.drift(z, 0.0), proc.drift(z2, 0.0)
        assert np.allclose(d2[:10], 2 * d1[:10])

    def test_drift_matches_matrix_assembly(self):
        # product form against explicit tridiagonal matrices, per particle
        spec = default_frame_spec(6)
        proc, _ = build_shear_frame(spec, xi=0.9)
        rng = np.random.default_rng(4)
        x = np.abs(rng.standard_normal(24)) + 0.5
        t = 0.7
        d = proc.drift(x, t)
        u, v, kp, cp = x[:6], x[6:12], x[12:18], x[18:]
        K = tridiagonal_stiffness(kp, 6)
        C = tridiagonal_stiffness(cp, 6)
        r = 500.0 * np.exp(-t) * 0.9 * np.cos(5 * t)
        assert np.allclose(d[:6], v)
        assert np.allclose(d[6:12], r - C @ v - K @ u)
        assert np.array_equal(d[12:], np.zeros(12))

    def test_vectorized_drift_matches_columnwise(self):
        spec = default_frame_spec(3)
        proc, _ = build_shear_frame(spec, xi=1.3)
        rng = np.random.default_rng(5)
        ens = np.abs(rng.standard_normal((12, 7))) + 0.1
        batch = proc.drift_ensemble(ens, 0.2)
        cols = np.column_stack([proc.drift(ens[:, j], 0.2) for j in range(7)])
        assert np.allclose(batch, cols)

    def test_measured_channel_selection(self):
        spec = ShearFrameSpec(dof=3, k_ref=(100.0,) * 3, c_ref=(5.0,) * 3,
                              measured=(0, 2))
        _, meas = build_shear_frame(spec)
        x = np.arange(12.0)
        assert np.array_equal(meas.h(x, 0.0), [x[3], x[5]])

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ShearFrameSpec(dof=2, k_ref=(1.0,), c_ref=(1.0, 1.0))
        with pytest.raises(ValueError):
            ShearFrameSpec(dof=2, k_ref=(1.0, -1.0), c_ref=(1.0, 1.0))


class TestDamagedFrame:
    def test_default_damage_location(self):
        spec = default_frame_spec(20)
        proc, _ = build_damaged_frame(spec)
        # the damaged reference only shows through the truth start state
        x0 = frame_truth_x0(ShearFrameSpec(
            dof=20, k_ref=tuple(98.0 if i == 9 else 100.0 for i in range(20)),
            c_ref=(5.0,) * 20))
        assert x0[40 + 9] == 98.0
        assert np.all(np.delete(x0[40:60], 9) == 100.0)

    def test_no_damage_is_identity(self):
        spec = default_frame_spec(4)
        proc_a, _ = build_damaged_frame(spec, damaged_storey=2, damaged_k=100.0)
        proc_b, _ = build_shear_frame(spec)
        x = np.abs(np.random.default_rng(0).standard_normal(16)) + 0.5
        assert np.allclose(proc_a.drift(x, 0.1), proc_b.drift(x, 0.1))

    def test_out_of_range_storey(self):
        spec = default_frame_spec(4)
        with pytest.raises(ValueError):
            build_damaged_frame(spec, damaged_storey=5)
        with pytest.raises(ValueError):
            build_damaged_frame(spec, damaged_storey=0)


class TestPendulum:
    def test_equilibrium(self):
        proc, _ = build_pendulum(PendulumSpec(), xi=0.0)
        x = np.array([0.0, 0.0, 10.0, 2.0])
        assert np.array_equal(proc.drift(x, 0.5), np.zeros(4))

    def test_reaction_measurement_arithmetic(self):
        _, meas = build_pendulum(PendulumSpec())
        x = np.array([np.pi / 2, 1.0, 2.0, 3.0])  # (x, v, k, c)
        assert meas.h(x, 0.0)[0] == pytest.approx(3.0 * 1.0 + 2.0 * 1.0)

    def test_drift_formula(self):
        spec = PendulumSpec()
        proc, _ = build_pendulum(spec, xi=-1.2)
        x = np.array([0.4, -0.3, 11.0, 1.5])
        t = 2.0
        r = 5.0 * np.exp(-0.01 * t) * 1.2 * np.cos(5 * t)
        d = proc.drift(x, t)
        assert d[0] == pytest.approx(-0.3)
        assert d[1] == pytest.approx(r - 1.5 * (-0.3) - 11.0 * np.sin(0.4))
        assert d[2] == 0.0 and d[3] == 0.0

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            PendulumSpec(c=-1.0)


class TestPopulation:
    def test_drift_fixed_points_and_values(self):
        proc, _ = build_population(PopulationSpec())
        drift = lambda v: proc.drift(np.array([v]), 0.0)[0]
        assert drift(0.0) == 0.0
        assert drift(2.0) == 0.0
        assert drift(2.1) == pytest.approx(0.105)
        assert drift(1.0) == pytest.approx(-0.5)

    def test_noise_free_divergence_exceeds_ten(self):
        # the unstable branch blows up super-exponentially (overflow well
        # before t = 10), so integrate only to t = 4: 10 is crossed by then
        spec = PopulationSpec(proc_noise_std=0.0)
        proc, _ = build_population(spec)
        proc_nf = type(proc)(n=1, m=0, drift=proc.drift,
                             diffusion=lambda x, t: np.zeros((1, 0)))
        grid = 0.1 * np.arange(1, 41)
        traj = simulate_truth(proc_nf, np.array([2.1]), grid, RngStream(0, 0))
        crossed = np.argmax(traj[0] > 10.0)
        assert traj[0].max() > 10.0
        assert grid[crossed] < 10.0

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            PopulationSpec(r2=0.0)


class TestLinearGaussian:
    def test_constant_truth_for_zero_fields(self):
        spec = LinearGaussianSpec(A=[[0.0]], F=[[0.0]], H=[[1.0]], R=[[0.1]],
                                  x0_mean=[1.0], x0_cov=[[0.0]])
        proc, _ = build_linear_gaussian(spec, dt=0.1)
        grid = 0.1 * np.arange(1, 20)
        traj = simulate_truth(proc, np.array([1.0]), grid, RngStream(0, 0))
        assert np.allclose(traj, 1.0)

    def test_ou_stationary_variance(self):
        # A = -1, F = 1: long-run variance F^2 / (2|A|) = 0.5
        spec = scalar_linear_gaussian()
        proc, _ = build_linear_gaussian(spec, dt=0.01)
        grid = 0.01 * np.arange(1, 60_001)
        traj = simulate_truth(proc, np.array([0.0]), grid, RngStream(10, 0))
        tail = traj[0, 10_000:]
        assert tail.var() == pytest.approx(0.5, rel=0.1)

    def test_non_pd_R_rejected(self):
        with pytest.raises(ValueError):
            LinearGaussianSpec(A=[[0.0]], F=[[1.0]], H=[[1.0]], R=[[0.0]],
                               x0_mean=[0.0], x0_cov=[[1.0]])


class TestKalmanOracle:
    def test_exact_observation_limit(self):
        spec = LinearGaussianSpec(A=[[0.0]], F=[[1.0]], H=[[1.0]], R=[[1e-12]],
                                  x0_mean=[0.0], x0_cov=[[1.0]])
        times = 0.1 * np.arange(1, 6)
        vals = np.array([[1.0, -2.0, 0.5, 3.0, 0.0]])
        means, _ = kalman_oracle(spec, MeasurementSeries(times, vals), 0.1)
        assert np.allclose(means, vals, atol=1e-5)

    def test_variance_never_increases_without_process_noise(self):
        spec = LinearGaussianSpec(A=[[0.0]], F=[[0.0]], H=[[1.0]], R=[[0.5]],
                                  x0_mean=[0.0], x0_cov=[[2.0]])
        times = 0.1 * np.arange(1, 30)
        vals = RngStream(2, 0).standard_normal((1, 29))
        _, covs = kalman_oracle(spec, MeasurementSeries(times, vals), 0.1)
        variances = covs[:, 0, 0]
        assert np.all(np.diff(variances) <= 1e-15)

    def test_textbook_single_update(self):
        spec = LinearGaussianSpec(A=[[0.0]], F=[[0.0]], H=[[1.0]], R=[[1.0]],
                                  x0_mean=[0.0], x0_cov=[[1.0]])
        series = MeasurementSeries(np.array([1.0]), np.array([[2.0]]))
        means, covs = kalman_oracle(spec, series, 1.0)
        assert means[0, 0] == pytest.approx(1.0)
        assert covs[0, 0, 0] == pytest.approx(0.5)


def test_nu_from_noise_std_consistency():
    # increments of a Brownian noise with this intensity reproduce the
    # requested per-sample standard deviation
    nu = nu_from_noise_std([0.1, 0.3], 0.1)
    incr_cov = nu @ nu.T * 0.1
    assert np.allclose(np.sqrt(np.diag(incr_cov)), [0.1, 0.3])


def test_truth_reproducibility():
    spec = PopulationSpec()
    proc, _ = build_population(spec)
    grid = 0.1 * np.arange(1, 30)
    a = simulate_truth(proc, np.array([2.1]), grid, RngStream(6, 0))
    b = simulate_truth(proc, np.array([2.1]), grid, RngStream(6, 0))
    assert np.array_equal(a, b)
