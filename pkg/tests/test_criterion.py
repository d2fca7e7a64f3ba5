"""Tests for the calibration criterion: value, gradient, and grid search."""

import math

import numpy as np
import pytest

from mlrfit.core import Dataset, PermutationSet, norm_n, sample_permutations, standardize
from mlrfit.criterion import (
    CriterionContext,
    Family,
    finite_difference_gradient,
    grid_select,
    mlr_gradient,
    mlr_value,
    mlr_value_and_grad,
)
from mlrfit.estimators import HyperParams, aggregated_estimator, ridge, sparse_estimator


def _random_context(seed, n=20, p=5, T=3, family=Family.RIDGE):
    rng = np.random.default_rng(seed)
    d = Dataset(rng.standard_normal((n, p)), rng.standard_normal(n))
    sd, _ = standardize(d)
    perms = sample_permutations(n, T, derangements=True, seed=seed + 1000)
    return CriterionContext(sd, perms, family)


def _random_hp(seed, p):
    rng = np.random.default_rng(seed)
    return HyperParams(
        log_lambda=float(rng.uniform(-1, 3)),
        log_kappa=float(rng.uniform(-3, 0)),
        gamma=rng.standard_normal(p) * 0.5,
        mu=float(rng.uniform(-2, 2)),
    )


class TestValue:
    def test_decomposition(self):
        ctx = _random_context(0)
        ev = mlr_value(ctx, HyperParams.default(5))
        assert abs(ev.value - (ev.fit_term - ev.muddle_term)) <= 1e-14
        assert ev.fit_term >= 0 and ev.muddle_term >= 0

    def test_huge_lambda_null_model(self):
        ctx = _random_context(1, n=40, p=6)
        hp = HyperParams(log_lambda=math.log(1e12), gamma=np.zeros(6))
        ev = mlr_value(ctx, hp)
        assert abs(ev.value) <= 1e-6

    def test_identity_permutation_gives_exact_zero(self):
        rng = np.random.default_rng(2)
        sd, _ = standardize(Dataset(rng.standard_normal((12, 4)), rng.standard_normal(12)))
        perms = PermutationSet(np.arange(12)[None, :])
        ctx = CriterionContext(sd, perms, Family.RIDGE)
        ev = mlr_value(ctx, HyperParams(log_lambda=0.0, gamma=np.zeros(4)))
        assert ev.value == 0.0

    @pytest.mark.parametrize("family", list(Family))
    def test_compositional_oracle(self, family):
        ctx = _random_context(3, family=family)
        hp = _random_hp(4, 5)
        ev = mlr_value(ctx, hp)

        X, Y = ctx.dataset.X, ctx.dataset.Y

        def fit(y):
            if family is Family.RIDGE:
                return ridge(hp.lam, X, y)
            if family is Family.SPARSE:
                return sparse_estimator(hp.lam, hp.kappa, hp.gamma, X, y)
            return aggregated_estimator(hp, X, y)

        fit_term = norm_n(Y - X @ fit(Y))
        muddle = np.mean(
            [norm_n(Y[perm] - X @ fit(Y[perm])) for perm in ctx.perms.perms]
        )
        np.testing.assert_allclose(ev.value, fit_term - muddle, rtol=1e-12, atol=1e-12)

    def test_permutation_order_exchangeability(self):
        ctx = _random_context(5, T=6)
        hp = HyperParams.default(5)
        shuffled = CriterionContext(
            ctx.dataset,
            PermutationSet(ctx.perms.perms[::-1].copy(), derangement_flag=True),
            ctx.family,
        )
        assert mlr_value(ctx, hp).value == mlr_value(shuffled, hp).value

    def test_rejects_length_mismatch(self):
        rng = np.random.default_rng(6)
        sd, _ = standardize(Dataset(rng.standard_normal((10, 3)), rng.standard_normal(10)))
        perms = sample_permutations(8, 2, derangements=True, seed=0)
        with pytest.raises(ValueError):
            CriterionContext(sd, perms, Family.RIDGE)


class TestGradient:
    def test_ridge_family_uses_only_lambda(self):
        ctx = _random_context(7)
        grad = mlr_gradient(ctx, _random_hp(8, 5))
        np.testing.assert_array_equal(grad.gamma, np.zeros(5))
        assert grad.mu == 0.0
        assert grad.log_kappa == 0.0
        assert grad.log_lambda != 0.0

    @pytest.mark.parametrize("family", list(Family))
    def test_finite_difference_agreement(self, family):
        for seed in range(5):
            ctx = _random_context(100 + seed, family=family)
            hp = _random_hp(200 + seed, 5)
            grad = mlr_gradient(ctx, hp)
            fd = finite_difference_gradient(ctx, hp)
            analytic = np.concatenate(
                ([grad.log_lambda, grad.log_kappa], grad.gamma, [grad.mu])
            )
            numeric = np.concatenate(([fd.log_lambda, fd.log_kappa], fd.gamma, [fd.mu]))
            denom = max(np.linalg.norm(numeric), 1e-10)
            assert np.linalg.norm(analytic - numeric) / denom <= 1e-4

    def test_flat_at_huge_lambda(self):
        ctx = _random_context(9)
        hp = HyperParams(log_lambda=math.log(1e12), gamma=np.zeros(5))
        grad = mlr_gradient(ctx, hp)
        assert abs(grad.log_lambda) <= 1e-6

    def test_degenerate_exact_fit_flagged(self):
        # square invertible design with negligible lambda fits every column exactly
        rng = np.random.default_rng(10)
        d = Dataset(np.eye(3) + 0.01 * rng.standard_normal((3, 3)),
                    rng.standard_normal(3))
        perms = sample_permutations(3, 2, derangements=True, seed=1)
        ctx = CriterionContext(d, perms, Family.RIDGE)
        hp = HyperParams(log_lambda=math.log(1e-30), gamma=np.zeros(3))
        grad = mlr_gradient(ctx, hp)
        assert grad.degenerate
        assert np.isfinite(grad.log_lambda)

    def test_value_and_grad_consistent(self):
        ctx = _random_context(11, family=Family.AGGREGATED)
        hp = _random_hp(12, 5)
        ev, grad = mlr_value_and_grad(ctx, hp)
        assert ev.value == mlr_value(ctx, hp).value
        assert grad.log_lambda == mlr_gradient(ctx, hp).log_lambda

    def test_muddle_weight_zero_drops_the_counterweight(self):
        ctx = _random_context(13)
        hp = HyperParams.default(5)
        ev, _ = mlr_value_and_grad(ctx, hp, muddle_weight=0.0)
        assert ev.value == ev.fit_term


class TestGridSelect:
    def test_single_point(self):
        ctx = _random_context(14)
        hp = HyperParams.default(5)
        best, curve = grid_select(ctx, [hp])
        assert best is hp
        assert curve.shape == (1,)

    def test_returns_curve_argmin(self):
        ctx = _random_context(15)
        grid = [
            HyperParams(log_lambda=math.log(lam), gamma=np.zeros(5))
            for lam in np.logspace(-2, 4, 12)
        ]
        best, curve = grid_select(ctx, grid)
        assert best.lam == grid[int(np.argmin(curve))].lam

    def test_tie_breaks_toward_smallest_lambda(self):
        ctx = _random_context(16)
        # two copies of the same point produce an exact tie
        a = HyperParams(log_lambda=math.log(5.0), gamma=np.zeros(5))
        b = HyperParams(log_lambda=math.log(5.0), gamma=np.zeros(5))
        big = HyperParams(log_lambda=math.log(1e12), gamma=np.zeros(5))
        huge = HyperParams(log_lambda=math.log(1e13), gamma=np.zeros(5))
        # at saturation the value curve is flat: both huge points tie near zero
        best, curve = grid_select(ctx, [huge, big, a, b])
        if curve[0] == curve[1]:
            assert best.lam <= big.lam

    def test_empty_grid_rejected(self):
        ctx = _random_context(17)
        with pytest.raises(ValueError):
            grid_select(ctx, [])

    def test_selected_lambda_close_to_test_optimum(self):
        from mlrfit.datagen import ScenarioSpec, generate
        from mlrfit.metrics import r2_score

        inst = generate(ScenarioSpec(scenario="A", sigma=10.0, seed=21))
        sd, stz = standardize(inst.train)
        perms = sample_permutations(sd.n, 30, derangements=True, seed=22)
        ctx = CriterionContext(sd, perms, Family.RIDGE)
        lams = np.logspace(-4, 4, 50)
        grid = [HyperParams(log_lambda=math.log(l), gamma=np.zeros(sd.p)) for l in lams]
        best, _ = grid_select(ctx, grid)

        def test_r2(lam):
            beta, intercept = stz.coef_to_original(ridge(lam, sd.X, sd.Y))
            return r2_score(inst.test.Y, inst.test.X @ beta + intercept)

        r2_selected = test_r2(best.lam)
        r2_best = max(test_r2(l) for l in lams)
        assert r2_selected >= r2_best - 0.05
