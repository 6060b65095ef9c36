import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special, stats

from gldhurdle import gld
from gldhurdle.gld import GldParams
from gldhurdle.optim import FitError, OptimizerConfig
from gldhurdle.regression import (
    RegressionFit,
    SeparationError,
    gld_regression_fit,
    hurdle_regression_fit,
    lambda1_star,
    logistic_fit,
    ols_fit,
    quantile_type8,
    regression_residuals,
    replicate_streams,
    simulate_coefficient_cis,
)

FAST = OptimizerConfig(n_candidates=1000, restarts=1)


def design(n, rng):
    return np.column_stack([np.ones(n), rng.normal(size=n), rng.random(n) < 0.5])


class TestOls:
    def test_exact_line(self):
        beta, resid = ols_fit([[1, 1], [1, 2]], [2, 4])
        assert beta == pytest.approx([0, 2], abs=1e-12)
        assert np.allclose(resid, 0)

    def test_constant(self):
        beta, resid = ols_fit(np.ones((5, 1)), np.full(5, 3.5))
        assert beta == pytest.approx([3.5])
        assert np.allclose(resid, 0, atol=1e-14)

    def test_interpolation(self):
        rng = np.random.default_rng(0)
        W = rng.normal(size=(50, 3))
        b = np.array([1.5, -2.0, 0.25])
        beta, _ = ols_fit(W, W @ b)
        assert np.max(np.abs(beta - b)) < 1e-10

    def test_rank_deficient(self):
        W = np.column_stack([np.ones(10), np.arange(10.0), 2 * np.arange(10.0)])
        with pytest.raises(ValueError):
            ols_fit(W, np.arange(10.0))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ols_fit(np.ones((4, 1)), np.ones(3))


class TestLambda1Star:
    @pytest.mark.parametrize("par", ["RS", "FKML"])
    def test_symmetric(self, par):
        assert lambda1_star(2.0, 0.3, 0.3, par) == 0.0

    def test_skewed_rs(self):
        assert lambda1_star(0.11, 0.0023, 0.19, "RS") == pytest.approx(-1.4306, abs=1e-4)

    def test_fkml_scenario(self):
        assert lambda1_star(2, 0.13, 0.13, "FKML") == 0.0

    def test_no_mean(self):
        with pytest.raises(ValueError):
            lambda1_star(1.0, -1.0, 0.2, "FKML")

    @given(st.floats(0.05, 5), st.floats(-0.9, 3), st.floats(-0.9, 3))
    def test_zero_mean_fkml(self, l2, l3, l4):
        p = GldParams.fkml(lambda1_star(l2, l3, l4, "FKML"), l2, l3, l4)
        assert abs(gld.mean(p)) <= 1e-10 * max(1.0, 1.0 / l2 / (1 + min(l3, l4)))

    @given(st.floats(0.05, 5), st.floats(0.001, 3), st.floats(0.001, 3))
    def test_zero_mean_rs(self, l2, l3, l4):
        p = GldParams.rs(lambda1_star(l2, l3, l4, "RS"), l2, l3, l4)
        assert abs(gld.mean(p)) <= 1e-10 * max(1.0, 1.0 / l2)


class TestQuantileType8:
    def test_example(self):
        assert quantile_type8([1, 2, 3, 4], 0.5) == pytest.approx(2.5)
        assert quantile_type8([Fraction(i) for i in (4, 1, 3, 2)], Fraction(1, 2)) == Fraction(5, 2)

    def test_single(self):
        assert all(quantile_type8([7.0], p) == 7.0 for p in (0.0, 0.2, 0.5, 1.0))

    def test_clamping(self):
        assert quantile_type8([1, 2, 3], 0.0) == 1
        assert quantile_type8([1, 2, 3], 1.0) == 3

    def test_matches_numpy_median_unbiased(self):
        x = np.random.default_rng(1).normal(size=37)
        for p in (0.025, 0.3, 0.5, 0.975):
            assert quantile_type8(x, p) == pytest.approx(
                np.quantile(x, p, method="median_unbiased"), rel=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            quantile_type8([], 0.5)
        with pytest.raises(ValueError):
            quantile_type8([1, 2], 1.5)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40), st.floats(-50, 50))
    def test_symmetric_median(self, xs, m):
        x = np.concatenate([m + np.asarray(xs), m - np.asarray(xs)])
        assert quantile_type8(x, 0.5) == pytest.approx(m, abs=1e-9 * (1 + np.max(np.abs(x))))

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40),
           st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, xs, p, q):
        lo, hi = min(p, q), max(p, q)
        assert quantile_type8(xs, lo) <= quantile_type8(xs, hi) + 1e-9

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40),
           st.floats(0, 1), st.floats(0.01, 10), st.floats(-10, 10))
    def test_affine(self, xs, p, a, b):
        x = np.asarray(xs)
        got = quantile_type8(a * x + b, p)
        assert got == pytest.approx(a * quantile_type8(x, p) + b, abs=1e-7 * (1 + a * 1e3))


class TestLogistic:
    def test_half(self):
        fit = logistic_fit(np.ones((10, 1)), [0, 1] * 5)
        assert fit.gamma == pytest.approx([0.0], abs=1e-12)
        assert fit.converged

    def test_eighty_percent(self):
        fit = logistic_fit(np.ones((10, 1)), [1] * 8 + [0] * 2)
        assert fit.gamma[0] == pytest.approx(math.log(4), rel=1e-10)

    def test_separation(self):
        z = np.array([0, 0, 0, 1, 1, 1], dtype=float)
        Z = np.column_stack([np.ones(6), z])
        with pytest.raises(SeparationError):
            logistic_fit(Z, z)

    def test_quasi_separation(self):
        x = np.array([0, 0, 1, 1, 2, 2], dtype=float)
        Z = np.column_stack([np.ones(6), x])
        with pytest.raises(SeparationError):
            logistic_fit(Z, [0, 0, 0, 1, 1, 1])

    def test_one_class(self):
        with pytest.raises(FitError):
            logistic_fit(np.ones((5, 1)), np.zeros(5))

    def test_non_binary(self):
        with pytest.raises(ValueError):
            logistic_fit(np.ones((3, 1)), [0, 0.5, 1])

    def test_recovery_and_gradient(self):
        rng = np.random.default_rng(3)
        Z = design(4000, rng)
        gamma = np.array([1.6, -0.13, 0.21])
        v = (rng.random(4000) < special.expit(Z @ gamma)).astype(float)
        fit = logistic_fit(Z, v)
        assert fit.converged and fit.gradient_norm < 1e-6
        assert np.all(np.abs(fit.gamma - gamma) < 4 * fit.se)
        assert np.all((fit.p_values >= 0) & (fit.p_values <= 1))
        assert set(fit.to_dict()) >= {"gamma", "se", "p_values", "deviance"}

    @given(st.integers(0, 2 ** 32 - 1))
    def test_gradient_property(self, seed):
        rng = np.random.default_rng(seed)
        Z = design(200, rng)
        v = (rng.random(200) < special.expit(Z @ rng.normal(0, 0.7, 3))).astype(float)
        try:
            fit = logistic_fit(Z, v)
        except FitError:
            return
        if fit.converged:
            assert fit.gradient_norm < 1e-6


class TestGldRegression:
    def test_near_noiseless(self):
        rng = np.random.default_rng(4)
        W = design(2000, rng)
        b = np.array([2.0, -1.0, 0.5])
        law = GldParams.fkml(0, 2000, 0.13, 0.13)  # sd about 1e-3
        x = W @ b + gld.sample(law, 2000, rng)
        fit = gld_regression_fit(W, x, "FKML", FAST)
        assert np.max(np.abs(fit.beta - b)) < 0.01

    @pytest.mark.parametrize("par", ["RS", "FKML"])
    def test_properties(self, par):
        rng = np.random.default_rng(5)
        W = design(300, rng)
        law = GldParams(0, 2, 0.13, 0.13, par)
        x = W @ np.array([6.13, -0.021, -0.35]) + gld.sample(law, 300, rng)
        fit = gld_regression_fit(W, x, par, FAST)
        assert fit.loglik >= fit.init_loglik
        assert abs(gld.mean(fit.error_params)) < 1e-8
        assert gld.is_valid(fit.error_params)
        assert fit.to_dict()["parametrization"] == par
        assert np.all(np.isfinite(fit.beta))

    def test_skewed_rs_errors(self):
        rng = np.random.default_rng(6)
        W = design(1000, rng)
        law = GldParams.rs(lambda1_star(0.11, 0.0023, 0.19), 0.11, 0.0023, 0.19)
        b = np.array([6.13, -0.021, -0.35])
        x = W @ b + gld.sample(law, 1000, rng)
        fit = gld_regression_fit(W, x, "RS", FAST)
        assert np.all(np.abs(fit.beta - b) < np.array([0.6, 0.3, 0.6]))

    def test_no_intercept_column(self):
        rng = np.random.default_rng(7)
        W = np.column_stack([rng.normal(size=200), rng.normal(size=200)])
        x = W @ np.array([1.0, 2.0]) + gld.sample(GldParams.rs(0, 2, 0.13, 0.13), 200, rng)
        fit = gld_regression_fit(W, x, "RS", FAST)
        assert np.max(np.abs(fit.beta - [1.0, 2.0])) < 0.2

    def test_too_few(self):
        with pytest.raises(FitError):
            gld_regression_fit(np.ones((7, 1)), np.arange(7.0), "RS")


class TestCoefficientCis:
    def setup_method(self):
        rng = np.random.default_rng(8)
        self.W = design(150, rng)
        law = GldParams.rs(0, 2, 0.13, 0.13)
        x = self.W @ np.array([3.0, 1.0, -0.5]) + gld.sample(law, 150, rng)
        self.fit = gld_regression_fit(self.W, x, "RS", FAST)

    def test_adjusted_and_bracketing(self):
        ci = simulate_coefficient_cis(self.fit, self.W, n_reps=12, seed=3, config=FAST)
        assert ci.samples.shape == (12, 3)
        assert ci.samples.mean(axis=0) == pytest.approx(self.fit.beta, abs=1e-12)
        assert np.all(ci.lower <= ci.estimate) and np.all(ci.estimate <= ci.upper)
        assert ci.failures == 0
        assert ci.to_dict()["replicates"] == 12

    def test_seeded(self):
        a = simulate_coefficient_cis(self.fit, self.W, n_reps=3, seed=1, config=FAST)
        b = simulate_coefficient_cis(self.fit, self.W, n_reps=3, seed=1, config=FAST)
        assert np.array_equal(a.samples, b.samples)

    def test_single_replicate_sd(self):
        ci = simulate_coefficient_cis(self.fit, self.W, n_reps=1, seed=1, config=FAST)
        assert all(math.isnan(v) for v in ci.to_dict()["sd"])

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            simulate_coefficient_cis(self.fit, self.W, n_reps=0)
        with pytest.raises(ValueError):
            simulate_coefficient_cis(self.fit, self.W, n_reps=5, alpha=1.0)


def test_replicate_streams_are_prefix_stable():
    a = [g.random() for g in replicate_streams(9, 3)]
    b = [g.random() for g in replicate_streams(9, 5)][:3]
    assert a == b


class TestHurdleRegression:
    def setup_method(self):
        rng = np.random.default_rng(10)
        n = 600
        self.X = design(n, rng)
        v = rng.random(n) < special.expit(self.X @ np.array([0.2, -0.5, 0.3]))
        eps = gld.sample(GldParams.rs(0, 2, 0.13, 0.13), n, rng)
        self.y = np.where(v, 0.0, self.X @ np.array([6.0, 0.5, -0.3]) + eps)

    def test_factorization(self):
        fit = hurdle_regression_fit(self.X, self.X, self.y, "RS", FAST, ci_reps=0)
        nz = self.y != 0
        alone = gld_regression_fit(self.X[nz], self.y[nz], "RS", FAST)
        logit = logistic_fit(self.X, (~nz).astype(float))
        assert np.array_equal(fit.nonzero_part.beta, alone.beta)
        assert np.array_equal(fit.zero_part.gamma, logit.gamma)
        assert fit.zero_count == int((~nz).sum()) and fit.n == len(self.y)

    def test_permuting_zero_rows(self):
        a = hurdle_regression_fit(self.X, self.X, self.y, "RS", FAST, ci_reps=0)
        zero = np.flatnonzero(self.y == 0)
        perm = np.arange(len(self.y))
        perm[zero] = zero[::-1]
        X2 = self.X.copy()
        X2[zero] = X2[zero[::-1]]
        b = hurdle_regression_fit(X2, X2, self.y[perm], "RS", FAST, ci_reps=0)
        assert np.array_equal(a.nonzero_part.beta, b.nonzero_part.beta)
        assert a.nonzero_part.loglik == b.nonzero_part.loglik

    def test_no_zeros(self):
        y = np.where(self.y == 0, 5.0, self.y)
        fit = hurdle_regression_fit(self.X, self.X, y, "RS", FAST, ci_reps=0)
        assert fit.zero_part is None and fit.zero_error
        alone = gld_regression_fit(self.X, y, "RS", FAST)
        assert np.array_equal(fit.nonzero_part.beta, alone.beta)

    def test_with_cis(self):
        fit = hurdle_regression_fit(self.X, self.X, self.y, "RS", FAST, ci_reps=4, seed=2)
        assert fit.nonzero_cis.samples.shape == (4, 3)
        d = fit.to_dict()
        assert d["nonzero_cis"]["replicates"] == 4

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            hurdle_regression_fit(self.X, self.X[:-1], self.y, "RS", FAST, ci_reps=0)


class TestResiduals:
    def fit(self, beta):
        return RegressionFit(np.asarray(beta, dtype=float), 0.0, 2.0, 0.13, 0.13, gld.Parametrization.RS,
                             0.0, True)

    def test_median_gives_zero(self):
        f = self.fit([1.0, 2.0])
        W = np.array([[1.0, 0.5]])
        y = W @ f.beta + gld.quantile(f.error_params, 0.5)
        e, r, flagged = regression_residuals(f, W, y)
        assert r[0] == pytest.approx(0.0, abs=1e-9)
        assert not flagged[0]

    def test_normal_quantile(self):
        f = self.fit([0.0])
        y = np.array([gld.quantile(f.error_params, 0.975)])
        _, r, _ = regression_residuals(f, np.ones((1, 1)), y)
        assert r[0] == pytest.approx(1.959964, abs=1e-6)

    def test_zero_beta(self):
        f = self.fit([0.0, 0.0])
        y = np.array([0.1, -0.2, 0.3])
        e, _, _ = regression_residuals(f, np.ones((3, 2)), y)
        assert np.array_equal(e, y)

    def test_outside_support_flagged(self):
        f = self.fit([0.0])
        sup = gld.support(f.error_params)
        y = np.array([sup.upper + 1.0, sup.lower - 1.0, 0.0])
        _, r, flagged = regression_residuals(f, np.ones((3, 1)), y)
        assert flagged.tolist() == [True, True, False]
        assert r[0] == np.inf and r[1] == -np.inf

    def test_correct_model_normal(self):
        rng = np.random.default_rng(11)
        W = design(1500, rng)
        law = GldParams.fkml(0, 2, 0.13, 0.13)
        x = W @ np.array([1.0, 2.0, 3.0]) + gld.sample(law, 1500, rng)
        fit = gld_regression_fit(W, x, "FKML", FAST)
        _, r, flagged = regression_residuals(fit, W, x)
        assert not flagged.any()
        assert stats.kstest(r, "norm").pvalue > 0.01
