import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from funhp import diffop
from funhp.model_sim import (
    ModelParams,
    component_covariances,
    conditional_expectation,
    grid_gap,
    log_grid,
    mc_consistency,
    risk_curve,
    run_replicates,
    simulate,
    smoother_matrix,
    verify_optimality,
)


def dense_gain(mu, tau, n):
    """Oracle Sigma_XY Sigma_X^{-1} from an explicit pseudo-inverse of P."""
    Pplus = np.linalg.pinv(diffop.dense_P(n))
    M = Pplus @ Pplus.T
    Sigma_X = mu * np.eye(n) + tau * M
    return np.linalg.solve(Sigma_X, tau * M).T  # Sigma_X, M symmetric


class TestModelParams:
    def test_defaults(self):
        p = ModelParams(n=10, mu=[1.0, 2.0], tau=[3.0, 4.0])
        assert p.J == 2
        assert_array_equal(p.gamma, np.zeros((2, 2)))
        assert_allclose(p.alpha, [1 / 3, 0.5])

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n=4, mu=[1.0], tau=[1.0]),
            dict(n=10, mu=[0.0], tau=[1.0]),
            dict(n=10, mu=[1.0], tau=[-1.0]),
            dict(n=10, mu=[1.0, 1.0], tau=[1.0]),
            dict(n=10, mu=[1.0], tau=[1.0], gamma=np.zeros((2, 2))),
            dict(n=10, mu=[1.0], tau=[1.0], gamma=[[np.nan], [0.0]]),
            dict(n=10, mu=[1.0], tau=[1.0], seed=-1),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ModelParams(**kwargs)


class TestSimulate:
    params = ModelParams(n=40, mu=[1.0, 0.3, 2.0], tau=[0.5, 1.0, 4.0], gamma=[[1.0, -2.0, 0.0], [0.5, 0.0, 3.0]], seed=99)

    def test_construction_identities(self):
        for rep in range(5):
            sim = simulate(self.params, rep)
            assert sim.X.shape == (40, 3) and sim.V.shape == (38, 3)
            assert np.abs(diffop.apply_P(sim.Y) - sim.V).max() <= 1e-10 * max(1, np.abs(sim.V).max())
            assert np.abs(sim.X - sim.Y - sim.U).max() <= 1e-10

    def test_kernel_offset(self):
        sim = simulate(self.params, 0)
        Z = diffop.kernel_Z(40)
        # Y - P^+ V is exactly the deterministic trend Z gamma
        assert_allclose(sim.Y - diffop.min_norm_right_inverse_apply(sim.V), Z @ self.params.gamma, atol=1e-10)

    def test_reproducible(self):
        a, b = simulate(self.params, 3), simulate(self.params, 3)
        assert_array_equal(a.X, b.X)
        assert_array_equal(a.V, b.V)

    def test_reps_and_components_differ(self):
        a, b = simulate(self.params, 0), simulate(self.params, 1)
        assert not np.allclose(a.U, b.U)
        assert not np.allclose(a.U[:, 0] / 1.0, a.U[:, 1] / np.sqrt(0.3))

    def test_component_stream_independent_of_J(self):
        # component j's draws do not depend on how many components exist
        one = simulate(ModelParams(n=20, mu=[1.0], tau=[1.0], seed=5), 2)
        three = simulate(ModelParams(n=20, mu=[1.0, 7.0, 9.0], tau=[1.0, 2.0, 3.0], seed=5), 2)
        assert_array_equal(one.U[:, 0], three.U[:, 0])

    def test_tiny_tau_gives_affine_trend(self):
        p = ModelParams(n=30, mu=[1.0], tau=[1e-16], gamma=[[2.0], [-1.0]], seed=1)
        sim = simulate(p)
        assert np.abs(diffop.apply_P(sim.Y)).max() <= 1e-6

    def test_minimal_n(self):
        sim = simulate(ModelParams(n=5, mu=[1.0], tau=[1.0]))
        assert sim.X.shape == (5, 1)

    def test_threads_give_identical_replicates(self):
        p = ModelParams(n=60, mu=[1.0, 0.5], tau=[2.0, 1.0], seed=8)
        serial = run_replicates(p, 20)
        threaded = run_replicates(p, 20, max_workers=4)
        for a, b in zip(serial, threaded):
            assert_array_equal(a, b)

    @pytest.mark.slow
    def test_sample_covariance(self):
        n, reps = 20, 5000
        p = ModelParams(n=n, mu=[1.0, 0.5], tau=[0.3, 1.0], gamma=[[1.0, 0.0], [0.0, 2.0]], seed=11)
        Xs = np.stack([simulate(p, r).X for r in range(reps)])  # (reps, n, J)
        y0 = diffop.kernel_Z(n) @ p.gamma
        for j in range(2):
            d = Xs[:, :, j] - y0[:, j]
            prod = d[:, :, None] * d[:, None, :]
            mean = prod.mean(axis=0)
            se = prod.std(axis=0, ddof=1) / np.sqrt(reps)
            expected = component_covariances(p.mu[j], p.tau[j], n).Sigma_X
            assert np.all(np.abs(mean - expected) <= 5 * se)
        # cross-component correlation
        d0 = Xs[:, :, 0] - y0[:, 0]
        d1 = Xs[:, :, 1] - y0[:, 1]
        cross = d0[:, :, None] * d1[:, None, :]
        se = cross.std(axis=0, ddof=1) / np.sqrt(reps)
        assert np.all(np.abs(cross.mean(axis=0)) <= 5 * se)


class TestComponentCovariances:
    def test_difference_is_noise(self):
        c = component_covariances(0.7, 2.0, 15)
        assert_allclose(c.Sigma_X - c.Sigma_Y, 0.7 * np.eye(15), rtol=0, atol=1e-13)
        assert_array_equal(c.Sigma_XY, c.Sigma_Y)

    def test_kernel_annihilated(self):
        c = component_covariances(1.0, 1.0, 25)
        assert np.abs(c.M @ diffop.kernel_Z(25)).max() <= 1e-9

    def test_n6_pinv_oracle(self):
        Pplus = np.linalg.pinv(diffop.dense_P(6))
        assert_allclose(component_covariances(1.0, 1.0, 6).M, Pplus @ Pplus.T, atol=1e-12)

    def test_psd(self):
        M = component_covariances(1.0, 1.0, 30).M
        assert_allclose(M, M.T)
        assert np.linalg.eigvalsh(M).min() >= -1e-10

    def test_domain(self):
        with pytest.raises(ValueError):
            component_covariances(0.0, 1.0, 10)


class TestConditionalExpectation:
    def test_centered_input(self):
        y0 = np.linspace(1, 3, 10)
        assert_allclose(conditional_expectation(y0, 1.0, 2.0, y0), y0)

    def test_noiseless_limit(self):
        rng = np.random.default_rng(0)
        n = 10
        x, y0 = rng.standard_normal(n), rng.standard_normal(n)
        Z = diffop.kernel_Z(n)
        expected = y0 + (np.eye(n) - Z @ Z.T) @ (x - y0)
        assert_allclose(conditional_expectation(x, 1e-12, 1.0, y0), expected, atol=1e-9)

    def test_n8_dense(self):
        rng = np.random.default_rng(1)
        x, y0 = rng.standard_normal(8), rng.standard_normal(8)
        c = component_covariances(0.8, 1.7, 8)
        oracle = y0 + c.Sigma_XY @ np.linalg.solve(c.Sigma_X, x - y0)
        assert_allclose(conditional_expectation(x, 0.8, 1.7, y0), oracle, atol=1e-12)

    @pytest.mark.parametrize("n", [5, 12, 30, 50])
    def test_pinv_oracle(self, n):
        rng = np.random.default_rng(n)
        for mu, tau in [(1.0, 1.0), (0.5, 2.0), (2.0, 0.25)]:
            x, y0 = rng.standard_normal(n), rng.standard_normal(n)
            oracle = y0 + dense_gain(mu, tau, n) @ (x - y0)
            assert np.abs(conditional_expectation(x, mu, tau, y0) - oracle).max() <= 1e-10

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            conditional_expectation(np.zeros(5), 1.0, 1.0, np.zeros(6))


class TestRiskCurve:
    grid = log_grid(0.01, 100, 200)

    def test_nonnegative(self):
        assert np.all(risk_curve(1.0, 2.0, 20, self.grid) >= 0)

    @pytest.mark.parametrize("mu, tau", [(1.0, 1.0), (1.0, 4.0)])
    def test_argmin_at_ratio(self, mu, tau):
        risk = risk_curve(mu, tau, 30, self.grid)
        k = int(np.argmin(risk))
        assert grid_gap(self.grid, k, mu / tau) <= 1.0

    def test_not_minimized_elsewhere(self):
        r = risk_curve(1.0, 2.0, 30, [0.5, 5.0])
        assert r[1] > r[0]

    def test_matches_monte_carlo(self):
        # one grid value, empirical mean of ||E[Y|X] - F X||^2
        n, mu, tau, alpha = 12, 1.0, 2.0, 3.0
        p = ModelParams(n=n, mu=[mu], tau=[tau], gamma=[[1.0], [2.0]], seed=4)
        y0 = diffop.kernel_Z(n) @ p.gamma[:, 0]
        vals = []
        for r in range(4000):
            x = simulate(p, r).X[:, 0]
            d = conditional_expectation(x, mu, tau, y0) - diffop.solve_smoother(x, alpha)
            vals.append(d @ d)
        vals = np.array(vals)
        exact = risk_curve(mu, tau, n, [alpha])[0]
        assert abs(vals.mean() - exact) <= 4 * vals.std(ddof=1) / np.sqrt(vals.size)

    def test_smoother_fixes_kernel(self):
        rng = np.random.default_rng(2)
        Z = diffop.kernel_Z(25)
        for alpha in (0.01, 1.0, 1e4):
            y0 = Z @ rng.standard_normal(2) * 10
            assert_allclose(smoother_matrix(alpha, 25) @ y0, y0, atol=1e-10 * np.abs(y0).max())

    def test_domain(self):
        with pytest.raises(ValueError):
            risk_curve(1.0, 1.0, 10, [0.0, 1.0])
        with pytest.raises(ValueError):
            risk_curve(1.0, 1.0, 10, [])

    def test_random_configurations(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            mu, tau = 10 ** rng.uniform(-0.8, 0.8, 2)
            n = int(rng.integers(10, 61))
            risk = risk_curve(mu, tau, n, self.grid)
            assert grid_gap(self.grid, int(np.argmin(risk)), mu / tau) <= 1.0


class TestVerifyOptimality:
    grid = log_grid(0.01, 100, 200)

    def test_single(self):
        rep = verify_optimality(ModelParams(n=20, mu=[1.0], tau=[1.0]), self.grid)
        assert rep["passed"]
        assert rep["components"][0]["argmin"] == pytest.approx(1.0, rel=0.05)

    def test_three_components(self):
        p = ModelParams(n=30, mu=[1.0, 1.0, 4.0], tau=[4.0, 1.0, 1.0])
        rep = verify_optimality(p, self.grid)
        assert rep["passed"]
        assert [c["gap_steps"] <= 1 for c in rep["components"]] == [True] * 3
        assert rep["curves"].shape == (200, 3)

    def test_ten_times_alpha_is_worse(self):
        r = risk_curve(1.0, 4.0, 30, [0.25, 2.5])
        assert r[1] > r[0]

    def test_grid_excluding_target_fails(self):
        rep = verify_optimality(ModelParams(n=20, mu=[1.0], tau=[1.0]), log_grid(10, 100, 50))
        assert not rep["passed"]


class TestMcConsistency:
    def test_report_structure_and_pass(self):
        p = ModelParams(n=10, mu=[1.0, 0.5], tau=[2.0, 1.0], seed=2)
        rep = mc_consistency(p, [50, 200, 800], reps=200)
        assert rep["passed"], rep["checks"]
        assert [r["n"] for r in rep["rows"]] == [50, 200, 800]
        c = rep["rows"][0]["components"][0]
        assert c["mu_var_theory"] > 0 and 0 <= c["degenerate_fraction"] <= 1

    def test_unbiased_n200(self):
        p = ModelParams(n=10, mu=[1.0], tau=[1.0], seed=3)
        comp = mc_consistency(p, [200], reps=2000)["rows"][0]["components"][0]
        assert abs(comp["mu_bias"]) <= 3 * comp["mu_se"]
        assert abs(comp["tau_bias"]) <= 3 * comp["tau_se"]

    def test_rmse_tau_decreases(self):
        p = ModelParams(n=10, mu=[1.0], tau=[1.0], seed=4)
        rows = mc_consistency(p, [50, 800], reps=300)["rows"]
        assert rows[1]["components"][0]["tau_rmse"] < rows[0]["components"][0]["tau_rmse"]

    @pytest.mark.slow
    def test_variance_formula(self):
        p = ModelParams(n=10, mu=[1.0], tau=[1.0], seed=5)
        comp = mc_consistency(p, [103], reps=10_000)["rows"][0]["components"][0]
        assert comp["mu_var_theory"] == pytest.approx(0.0703125)
        assert 0.0598 <= comp["mu_var_empirical"] <= 0.0809

    def test_bad_inputs(self):
        p = ModelParams(n=10, mu=[1.0], tau=[1.0])
        with pytest.raises(ValueError):
            mc_consistency(p, [200, 100], reps=10)
        with pytest.raises(ValueError):
            mc_consistency(p, [], reps=10)
