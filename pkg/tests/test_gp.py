"""GP regression tests against dense linear-algebra oracles.

The oracle path inverts the full covariance with np.linalg.inv and never
touches the package's Cholesky code, so agreement checks the factorized
implementation end to end.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import norm

from eicbo.errors import NumericFailure
from eicbo.gp import (
    HyperparameterBounds,
    KernelSpec,
    _chol_with_jitter,
    estimate_hyperparameters,
    fit_posterior,
    kernel_eval,
    kernel_matrix,
    log_marginal_likelihood,
    predict,
    predict_many,
)


def oracle_kernel(a, b, tau_sq, h):
    z = (np.atleast_1d(a) - np.atleast_1d(b)) / np.asarray(h, dtype=float)
    return tau_sq * math.exp(-0.5 * float(z @ z))


def oracle_gram(X, tau_sq, h):
    n = len(X)
    return np.array(
        [[oracle_kernel(X[i], X[j], tau_sq, h) for j in range(n)] for i in range(n)]
    )


def oracle_predict(X, Y, noise_var, tau_sq, h, x):
    A = oracle_gram(X, tau_sq, h) + noise_var * np.eye(len(X))
    A_inv = np.linalg.inv(A)
    kx = np.array([oracle_kernel(x, xi, tau_sq, h) for xi in X])
    return float(kx @ A_inv @ Y), float(tau_sq - kx @ A_inv @ kx)


def oracle_loglik(X, Y, noise_var, tau_sq, h):
    A = oracle_gram(X, tau_sq, h) + noise_var * np.eye(len(X))
    _, logdet = np.linalg.slogdet(A)
    return float(
        -0.5 * Y @ np.linalg.inv(A) @ Y - 0.5 * logdet - 0.5 * len(X) * math.log(2 * math.pi)
    )


class TestKernel:
    def test_matches_signal_variance_at_zero_distance(self):
        spec = KernelSpec(1.0, [1.0])
        assert kernel_eval([0.3], [0.3], spec) == pytest.approx(1.0, abs=1e-15)
        spec = KernelSpec(2.5, [0.7, 0.4])
        assert kernel_eval([0.1, 0.9], [0.1, 0.9], spec) == pytest.approx(2.5, abs=1e-15)

    def test_unit_separation_value(self):
        # exp(-0.5) at distance 1 with unit length scale
        spec = KernelSpec(1.0, [1.0])
        assert kernel_eval([0.0], [1.0], spec) == pytest.approx(0.6065306597126334, rel=1e-12)

    def test_dimension_mismatch_rejected(self):
        spec = KernelSpec(1.0, [1.0, 1.0])
        with pytest.raises(ValueError):
            kernel_eval([0.0], [1.0], spec)

    def test_symmetry_under_argument_swap(self):
        rng = np.random.default_rng(11)
        spec = KernelSpec(1.7, [0.3, 0.9, 0.5])
        for _ in range(25):
            a, b = rng.uniform(size=3), rng.uniform(size=3)
            assert kernel_eval(a, b, spec) == pytest.approx(kernel_eval(b, a, spec), rel=1e-14)

    def test_matrix_single_point(self):
        spec = KernelSpec(3.0, [0.5])
        assert_allclose(kernel_matrix([[0.2]], spec), [[3.0]])

    def test_matrix_duplicate_rows_saturate(self):
        spec = KernelSpec(2.0, [0.5, 0.5])
        K = kernel_matrix([[0.1, 0.2], [0.1, 0.2]], spec)
        assert_allclose(K, 2.0 * np.ones((2, 2)))

    def test_matrix_matches_pairwise_oracle_and_is_psd(self):
        rng = np.random.default_rng(4)
        spec = KernelSpec(1.3, [0.4])
        X = rng.uniform(size=(3, 1))
        K = kernel_matrix(X, spec)
        assert_allclose(K, oracle_gram(X, 1.3, [0.4]), rtol=1e-13)
        assert np.linalg.eigvalsh(K).min() >= -1e-10


class TestFitAndPredict:
    def test_single_point_weight(self):
        # alpha = Y / (tau_sq + noise_var) when n = 1
        model = fit_posterior([[0.5]], [2.0], 1.0, KernelSpec(1.0, [1.0]))
        assert_allclose(model.alpha, [1.0], rtol=1e-14)

    def test_noise_free_interpolation(self):
        spec = KernelSpec(1.0, [0.3])
        X = np.array([[0.1], [0.5], [0.9]])
        Y = np.array([0.3, -1.2, 0.8])
        model = fit_posterior(X, Y, 0.0, spec)
        mu, var = predict_many(model, X)
        assert_allclose(mu, Y, atol=1e-7)
        assert np.all(var <= 1e-6)

    def test_linear_system_residual(self):
        rng = np.random.default_rng(9)
        spec = KernelSpec(1.5, [0.4, 0.6])
        X = rng.uniform(size=(12, 2))
        Y = rng.standard_normal(12)
        model = fit_posterior(X, Y, 0.01, spec)
        A = oracle_gram(X, 1.5, [0.4, 0.6]) + 0.01 * np.eye(12)
        residual = np.linalg.norm(A @ model.alpha - Y) / np.linalg.norm(Y)
        assert residual <= 1e-8

    def test_predictions_match_dense_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            n, d = rng.integers(1, 9), rng.integers(1, 4)
            h = rng.uniform(0.2, 1.0, size=d)
            tau_sq = rng.uniform(0.5, 2.0)
            spec = KernelSpec(tau_sq, h)
            X = rng.uniform(size=(n, d))
            Y = rng.standard_normal(n)
            model = fit_posterior(X, Y, 0.05, spec)
            for _ in range(5):
                x = rng.uniform(size=d)
                mu, var = predict(model, x)
                mu0, var0 = oracle_predict(X, Y, 0.05, tau_sq, h, x)
                assert mu == pytest.approx(mu0, abs=1e-9)
                assert var == pytest.approx(max(var0, 0.0), abs=1e-9)

    def test_prior_prediction_without_data(self):
        spec = KernelSpec(2.0, [0.5])
        model = fit_posterior(np.zeros((0, 1)), np.zeros(0), 0.1, spec)
        assert predict(model, [0.4]) == (0.0, 2.0)

    def test_far_point_reverts_to_prior(self):
        spec = KernelSpec(1.4, [0.01])
        model = fit_posterior([[0.0]], [5.0], 0.01, spec)
        mu, var = predict(model, [1.0])
        assert abs(mu) < 1e-12
        assert var == pytest.approx(1.4, abs=1e-12)

    def test_variance_clamped_to_kernel_range(self):
        rng = np.random.default_rng(33)
        spec = KernelSpec(1.0, [0.2, 0.2])
        X = rng.uniform(size=(20, 2))
        model = fit_posterior(X, rng.standard_normal(20), 1e-6, spec)
        _, var = predict_many(model, rng.uniform(size=(200, 2)))
        assert np.all(var >= 0.0)
        assert np.all(var <= 1.0)

    def test_variance_never_increases_with_more_data(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n, d = rng.integers(2, 16), rng.integers(1, 4)
            spec = KernelSpec(rng.uniform(0.5, 2.0), rng.uniform(0.2, 0.8, size=d))
            X = rng.uniform(size=(n, d))
            Y = rng.standard_normal(n)
            grid = rng.uniform(size=(20, d))
            before = predict_many(fit_posterior(X, Y, 0.01, spec), grid)[1]
            X2 = np.vstack([X, rng.uniform(size=(1, d))])
            Y2 = np.append(Y, rng.standard_normal())
            after = predict_many(fit_posterior(X2, Y2, 0.01, spec), grid)[1]
            assert np.all(after <= before + 1e-8)

    def test_input_validation(self):
        spec = KernelSpec(1.0, [1.0])
        with pytest.raises(ValueError):
            fit_posterior([[0.1]], [1.0, 2.0], 0.1, spec)
        with pytest.raises(ValueError):
            fit_posterior([[0.1]], [1.0], -0.1, spec)
        with pytest.raises(ValueError):
            KernelSpec(0.0, [1.0])
        with pytest.raises(ValueError):
            KernelSpec(1.0, [0.5, -0.5])


class TestJitter:
    def test_duplicate_points_without_noise_need_jitter(self):
        spec = KernelSpec(1.0, [0.3])
        model = fit_posterior([[0.3], [0.3]], [1.0, 1.0], 0.0, spec)
        assert model.jitter > 0.0
        mu, var = predict(model, [0.3])
        assert math.isfinite(mu) and math.isfinite(var)

    def test_hopeless_matrix_reports_final_jitter(self):
        with pytest.raises(NumericFailure) as info:
            _chol_with_jitter(np.array([[-1.0]]), 1.0)
        assert info.value.jitter == pytest.approx(1e-4)


class TestLogMarginalLikelihood:
    def test_single_zero_observation(self):
        spec = KernelSpec(1.0, [1.0])
        expected = -0.5 * math.log(1.0 + 0.5) - 0.5 * math.log(2 * math.pi)
        assert log_marginal_likelihood([[0.2]], [0.0], 0.5, spec) == pytest.approx(
            expected, rel=1e-12
        )

    def test_single_observation_is_gaussian_density(self):
        spec = KernelSpec(1.3, [0.8])
        value = log_marginal_likelihood([[0.2]], [0.7], 0.2, spec)
        assert value == pytest.approx(norm.logpdf(0.7, 0.0, math.sqrt(1.5)), rel=1e-12)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(14)
        X = rng.uniform(size=(4, 2))
        Y = rng.standard_normal(4)
        spec = KernelSpec(0.9, [0.5, 0.7])
        assert log_marginal_likelihood(X, Y, 0.05, spec) == pytest.approx(
            oracle_loglik(X, Y, 0.05, 0.9, [0.5, 0.7]), rel=1e-10
        )


class TestEstimation:
    def test_recovers_length_scale_within_factor_two(self):
        # self-consistency: data drawn from the model, median over 20 seeds
        true = KernelSpec(1.0, [0.2])
        noise_var = 0.01
        recovered = []
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            X = rng.uniform(size=(60, 1))
            K = oracle_gram(X, 1.0, [0.2]) + noise_var * np.eye(60)
            Y = np.linalg.cholesky(K) @ rng.standard_normal(60)
            spec = estimate_hyperparameters(X, Y, noise_var, restarts=4, rng=rng)
            recovered.append(spec.length_scales[0])
        med = float(np.median(recovered))
        assert 0.1 <= med <= 0.4
        assert true.length_scales[0] / 2 <= med <= true.length_scales[0] * 2

    def test_beats_dense_grid_search(self):
        rng = np.random.default_rng(70)
        X = rng.uniform(size=(40, 1))
        K = oracle_gram(X, 1.0, [0.2]) + 0.01 * np.eye(40)
        Y = np.linalg.cholesky(K) @ rng.standard_normal(40)
        spec = estimate_hyperparameters(X, Y, 0.01, restarts=5, rng=rng)
        best_fit = oracle_loglik(X, Y, 0.01, spec.tau_sq, spec.length_scales)
        grid_best = -np.inf
        for lt in np.linspace(math.log(1e-3), math.log(1e3), 25):
            for lh in np.linspace(math.log(1e-2), math.log(1e1), 25):
                grid_best = max(
                    grid_best, oracle_loglik(X, Y, 0.01, math.exp(lt), [math.exp(lh)])
                )
        assert best_fit >= grid_best - 1e-3

    def test_result_within_bounds_and_not_below_starts(self):
        rng = np.random.default_rng(8)
        X = rng.uniform(size=(15, 2))
        Y = rng.standard_normal(15)
        bounds = HyperparameterBounds()
        start_rng = np.random.default_rng(5)
        spec = estimate_hyperparameters(
            X, Y, 0.01, bounds=bounds, restarts=6, rng=np.random.default_rng(5)
        )
        assert bounds.tau_sq[0] <= spec.tau_sq <= bounds.tau_sq[1]
        assert np.all(spec.length_scales >= bounds.length_scale[0])
        assert np.all(spec.length_scales <= bounds.length_scale[1])
        fitted = log_marginal_likelihood(X, Y, 0.01, spec)
        lo = np.array([math.log(1e-3), math.log(1e-2), math.log(1e-2)])
        hi = np.array([math.log(1e3), math.log(1e1), math.log(1e1)])
        for _ in range(6):
            theta = start_rng.uniform(lo, hi)
            start_spec = KernelSpec(math.exp(theta[0]), np.exp(theta[1:]))
            assert fitted >= log_marginal_likelihood(X, Y, 0.01, start_spec) - 1e-9

    def test_constant_zero_data_lands_on_boundary(self):
        X = np.linspace(0, 1, 10)[:, None]
        spec = estimate_hyperparameters(X, np.zeros(10), 0.01, restarts=3)
        # all-zero data pushes the signal variance to its lower bound
        assert spec.tau_sq == pytest.approx(1e-3, rel=1e-6)

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError):
            estimate_hyperparameters([[0.1]], [1.0], 0.01)
