"""Tests for ADAM minimization and the end-to-end fitting procedures."""

import numpy as np
import pytest

from mlrfit.core import Dataset, standardize
from mlrfit.criterion import CriterionContext, Family, mlr_value
from mlrfit.core import sample_permutations
from mlrfit.datagen import ScenarioSpec, generate
from mlrfit.estimators import HyperParams
from mlrfit.metrics import r2_score
from mlrfit.optimizer import AdamConfig, adam_minimize, fit_a_mlr, fit_r_mlr, fit_s_mlr


class TestAdamConfig:
    def test_defaults_match_published_settings(self):
        cfg = AdamConfig()
        assert cfg.learning_rate == 0.5
        assert cfg.beta1 == 0.5
        assert cfg.beta2 == 0.9
        assert cfg.tolerance == 1e-4
        assert cfg.max_iterations == 1000

    def test_validation(self):
        with pytest.raises(ValueError):
            AdamConfig(beta1=1.0)
        with pytest.raises(ValueError):
            AdamConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            AdamConfig(max_iterations=0)


class TestAdamMinimize:
    def test_hand_executed_first_step(self):
        # f(x)=x^2 at x0=1: bias-corrected m_hat=2, v_hat=4, step=0.5*2/(2+eps)
        def objective(x):
            return float(x[0] ** 2), np.array([2 * x[0]])

        cfg = AdamConfig(max_iterations=1, tolerance=1e-12)
        res = adam_minimize(objective, np.array([1.0]), cfg)
        assert abs(res.x[0] - 0.5) <= 1e-6
        assert res.initial_value == 1.0

    def test_zero_gradient_converges_immediately(self):
        def objective(x):
            return 0.0, np.zeros_like(x)

        res = adam_minimize(objective, np.array([3.0, -1.0]), AdamConfig())
        assert res.converged
        assert res.iterations == 1
        np.testing.assert_array_equal(res.x, [3.0, -1.0])

    def test_quadratic_bowl(self):
        def objective(x):
            return float(x @ x), 2 * x

        cfg = AdamConfig(learning_rate=0.05, beta2=0.99, tolerance=1e-14,
                         max_iterations=1000)
        res = adam_minimize(objective, np.array([2.0, -1.5, 0.7]), cfg)
        assert np.linalg.norm(res.x) <= 1e-3

    def test_trace_length_matches_iterations(self):
        def objective(x):
            return float(x @ x), 2 * x

        res = adam_minimize(objective, np.ones(2), AdamConfig())
        assert len(res.trace) == res.iterations

    def test_non_finite_objective_aborts(self):
        def objective(x):
            return float("nan"), np.zeros_like(x)

        with pytest.raises(FloatingPointError):
            adam_minimize(objective, np.ones(1), AdamConfig())


class TestFitProcedures:
    def test_determinism(self):
        inst = generate(ScenarioSpec(scenario="A", seed=0))
        a = fit_r_mlr(inst.train, seed=5)
        b = fit_r_mlr(inst.train, seed=5)
        np.testing.assert_array_equal(a.beta_hat, b.beta_hat)
        assert a.iterations == b.iterations

    def test_trace_and_convergence_contract(self):
        inst = generate(ScenarioSpec(scenario="A", seed=1))
        res = fit_r_mlr(inst.train, seed=2)
        assert res.converged
        assert len(res.criterion_trace) == res.iterations
        # ADAM is non-monotone, but it must end below the start
        sd, _ = standardize(inst.train)
        perms = sample_permutations(sd.n, 30, derangements=True, seed=2)
        ctx = CriterionContext(sd, perms, Family.RIDGE)
        start = mlr_value(ctx, HyperParams.default(sd.p)).value
        assert res.criterion_trace[-1] <= start

    def test_unit_consistency(self):
        inst = generate(ScenarioSpec(scenario="A", seed=3))
        res = fit_r_mlr(inst.train, seed=4)
        sd, stz = standardize(inst.train)
        from mlrfit.estimators import ridge

        beta_std = ridge(res.theta_hat.lam, sd.X, sd.Y)
        pred_std_route = (sd.X @ beta_std) * stz.y_scale + stz.y_mean
        pred_orig_route = inst.train.X @ res.beta_hat + res.intercept
        np.testing.assert_allclose(pred_orig_route, pred_std_route, rtol=1e-10)

    def test_grid_oracle_parity_scenario_a(self):
        inst = generate(ScenarioSpec(scenario="A", sigma=10.0, seed=6))
        res = fit_r_mlr(inst.train, seed=7)
        r2_fit = r2_score(inst.test.Y, inst.test.X @ res.beta_hat + res.intercept)
        sd, stz = standardize(inst.train)
        from mlrfit.estimators import ridge

        best = -np.inf
        for lam in np.logspace(-4, 4, 100):
            beta, intercept = stz.coef_to_original(ridge(lam, sd.X, sd.Y))
            best = max(best, r2_score(inst.test.Y, inst.test.X @ beta + intercept))
        assert r2_fit >= best - 0.05

    def test_pure_noise_is_not_fit(self):
        rng = np.random.default_rng(8)
        train = Dataset(rng.standard_normal((100, 80)), rng.standard_normal(100))
        res = fit_r_mlr(train, seed=9)
        X_test = rng.standard_normal((1000, 80))
        y_test = rng.standard_normal(1000)
        r2 = r2_score(y_test, X_test @ res.beta_hat + res.intercept)
        assert abs(r2) <= 0.05

    def test_s_mlr_populates_gates(self):
        inst = generate(ScenarioSpec(scenario="B", seed=10))
        res = fit_s_mlr(inst.train, seed=11)
        assert res.gate_values is not None
        s = res.gate_values.s
        assert np.all((s > 0) & (s < 1))
        assert res.aggregation_weight is None

    def test_s_mlr_coefficients_show_sharp_decline(self):
        inst = generate(ScenarioSpec(scenario="B", seed=12))
        res = fit_s_mlr(inst.train, seed=13)
        mags = np.sort(np.abs(res.beta_hat))[::-1]
        assert mags[0] / max(mags[-1], 1e-300) >= 1e3

    def test_a_mlr_reports_weight(self):
        inst = generate(ScenarioSpec(scenario="B", seed=14))
        res = fit_a_mlr(inst.train, seed=15)
        assert res.aggregation_weight is not None
        assert 0.0 < res.aggregation_weight < 1.0

    def test_a_mlr_frozen_logit_reduces_to_ridge(self):
        inst = generate(ScenarioSpec(scenario="A", seed=16))
        res_r = fit_r_mlr(inst.train, seed=17)
        res_a = fit_a_mlr(inst.train, seed=17, freeze_mu=40.0)
        np.testing.assert_allclose(res_a.beta_hat, res_r.beta_hat, atol=1e-10)
