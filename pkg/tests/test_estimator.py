import math
import json
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_psd
from spectral_flr.estimator import (
    ConditioningError,
    FitResult,
    canonical_order,
    choose_lambda_oracle,
    choose_lambda_theorem,
    concentration_norm,
    empirical_covariance,
    empirical_xy,
    fit_flr,
    fit_tikhonov_representer,
    noise_term_bound,
    noise_term_norm,
    rate_parameter,
    schedule_exponent,
)
from spectral_flr.filters import CUTOFF, LANDWEBER, SHOWALTER, TIKHONOV
from spectral_flr.kernels import CUBIC_KERNEL
from spectral_flr.operators import SpectralOperator, frac_power, sandwich
from spectral_flr.simulate import Scenario, gen_dataset

COMM = dict(t=4, c=2, alpha=0.5, nu=1)


class TestMoments:
    def test_single_row(self):
        np.testing.assert_array_equal(empirical_covariance([[1.0, 0.0]]).matrix, [[1, 0], [0, 0]])

    def test_two_rows(self):
        np.testing.assert_allclose(empirical_covariance(np.eye(2)).matrix, 0.5 * np.eye(2))

    def test_zero(self):
        np.testing.assert_array_equal(empirical_covariance(np.zeros((5, 3))).matrix, 0.0)

    def test_xy_examples(self):
        np.testing.assert_array_equal(empirical_xy(np.ones((4, 2)), np.zeros(4)), [0, 0])
        np.testing.assert_allclose(empirical_xy([[2.0, 0.0]], [3.0]), [6.0, 0.0])

    def test_noiseless_identity(self, rng):
        x = rng.standard_normal((50, 6))
        beta = rng.standard_normal(6)
        np.testing.assert_allclose(empirical_covariance(x).matrix @ beta, empirical_xy(x, x @ beta),
                                   atol=1e-12)

    def test_canonical_order_handles_ties(self):
        x = np.array([[1.0, 2.0], [1.0, 1.0], [0.0, 5.0]])
        order = canonical_order(x)
        np.testing.assert_array_equal(x[order], [[0, 5], [1, 1], [1, 2]])

    def test_shape_errors(self):
        with pytest.raises(ValueError):
            empirical_xy(np.ones((3, 2)), np.ones(4))
        with pytest.raises(ValueError):
            empirical_covariance(np.array([[np.nan, 1.0]]))


class TestFit:
    def test_scalar(self):
        fit = fit_flr(np.eye(1), [[1.0]], [1.0], TIKHONOV, 1.0)
        np.testing.assert_allclose(fit.beta_hat, [0.5])
        assert fit.diagnostics["eff_dim"] == pytest.approx(0.5)

    @pytest.mark.parametrize("m", [8, 16, 32])
    def test_exact_recovery(self, m):
        sc = Scenario(M=m, sigma=0.0, seed=11)
        ds = gen_dataset(sc, 4 * m)
        t = ds.truth.T
        lam_hat = sandwich(t, empirical_covariance(ds.x_coeffs))
        lam = 0.5 * lam_hat.eigenvalues[-1]
        fit = fit_flr(t, ds.x_coeffs, ds.y, CUTOFF, lam)
        beta = ds.truth.beta_star
        assert np.linalg.norm(fit.beta_hat - beta) / np.linalg.norm(beta) <= 1e-8

    def test_heavy_smoothing_bounded(self, rng):
        t = SpectralOperator(random_psd(rng, 6))
        x = rng.standard_normal((30, 6))
        y = rng.standard_normal(30)
        for fam in (TIKHONOV, CUTOFF, SHOWALTER, LANDWEBER):
            fit = fit_flr(t, x, y, fam, 1e6)
            eta = fit.diagnostics["lambda_hat_max_eig"]
            assert fit.lambda_used == pytest.approx(eta)
            assert fit.diagnostics["clamped"]
            bound = (1.0 / eta) * t.max_eigenvalue * np.linalg.norm(empirical_xy(x, y))
            assert np.linalg.norm(fit.beta_hat) <= bound * (1 + 1e-12)

    def test_clamp_logs(self, rng, caplog):
        x = rng.standard_normal((10, 3))
        with caplog.at_level(logging.WARNING, logger="spectral_flr"):
            fit_flr(np.eye(3), x, x[:, 0], TIKHONOV, 1e3)
        assert "clamped" in caplog.text
        caplog.clear()
        with caplog.at_level(logging.WARNING, logger="spectral_flr"):
            fit_flr(np.eye(3), x, x[:, 0], TIKHONOV, 1e3, warn_on_clamp=False)
        assert caplog.text == ""

    def test_zero_design(self):
        fit = fit_flr(np.eye(3), np.zeros((4, 3)), np.ones(4), TIKHONOV, 0.1)
        np.testing.assert_array_equal(fit.beta_hat, 0.0)

    def test_invalid_lambda(self):
        with pytest.raises(ValueError):
            fit_flr(np.eye(2), np.ones((3, 2)), np.ones(3), TIKHONOV, 0.0)

    def test_permutation_bit_identical(self, rng):
        ds = gen_dataset(Scenario(M=32, seed=2), 300)
        perm = rng.permutation(300)
        a = fit_flr(ds.truth.T, ds.x_coeffs, ds.y, TIKHONOV, 0.01)
        b = fit_flr(ds.truth.T, ds.x_coeffs[perm], ds.y[perm], TIKHONOV, 0.01)
        np.testing.assert_array_equal(a.beta_hat, b.beta_hat)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([TIKHONOV, CUTOFF, SHOWALTER, LANDWEBER]))
    def test_finite_and_eff_dim_in_range(self, seed, fam):
        r = np.random.default_rng(seed)
        t = SpectralOperator(random_psd(r, 5))
        x = r.standard_normal((12, 5))
        fit = fit_flr(t, x, r.standard_normal(12), fam, float(r.uniform(1e-4, 1.0)))
        assert np.all(np.isfinite(fit.beta_hat))
        assert 0.0 <= fit.diagnostics["eff_dim"] <= 5.0

    def test_result_json(self):
        fit = fit_flr(np.eye(1), [[1.0]], [1.0], TIKHONOV, 1.0)
        payload = json.loads(fit.to_json())
        assert set(payload) == {"beta_hat", "lambda_used", "filter_kind", "diagnostics"}
        assert isinstance(fit, FitResult)


class TestRepresenter:
    def test_scalar(self):
        np.testing.assert_allclose(fit_tikhonov_representer(np.eye(1), [[1.0]], [1.0], 1.0).beta_hat, [0.5])

    def test_zero_response(self, rng):
        fit = fit_tikhonov_representer(np.eye(3), rng.standard_normal((5, 3)), np.zeros(5), 0.1)
        np.testing.assert_array_equal(fit.beta_hat, 0.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_agrees_with_lambda_form(self, seed):
        # power spectrum: tau_1 = 1, so lambda = 0.1 is not clamped
        ds = gen_dataset(Scenario(spectrum="power", M=16, seed=seed), 100)
        a = fit_flr(ds.truth.T, ds.x_coeffs, ds.y, TIKHONOV, 0.1).beta_hat
        b = fit_tikhonov_representer(ds.truth.T, ds.x_coeffs, ds.y, 0.1).beta_hat
        assert np.linalg.norm(a - b) / np.linalg.norm(a) <= 1e-8

    def test_accepts_analytic_system(self):
        ds = gen_dataset(Scenario(M=16, seed=1), 40)
        a = fit_tikhonov_representer(CUBIC_KERNEL, ds.x_coeffs, ds.y, 0.1).beta_hat
        b = fit_tikhonov_representer(ds.truth.T, ds.x_coeffs, ds.y, 0.1).beta_hat
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_ill_conditioned(self):
        x = np.ones((6, 2))
        with pytest.raises(ConditioningError):
            fit_tikhonov_representer(np.eye(2), x, np.ones(6), 1e-300)


class TestSchedules:
    def test_commutative_example(self):
        assert rate_parameter("commutative-estimation", COMM) == 0.5
        assert choose_lambda_theorem("commutative-estimation", 128, COMM) == pytest.approx(0.015625, rel=1e-12)

    def test_noncommutative_example(self):
        params = dict(b=2, s=1, nu=1)
        assert rate_parameter("noncommutative-estimation", params) == 1.0
        assert choose_lambda_theorem("noncommutative-estimation", 128, params) == pytest.approx(0.25, rel=1e-12)

    def test_infinite_qualification(self):
        assert rate_parameter("commutative-estimation", dict(t=4, c=2, alpha=3, nu=np.inf)) == 3

    def test_saturation_caps(self):
        p = dict(t=4, c=2, alpha=3, nu=1)
        assert rate_parameter("commutative-estimation", p) == pytest.approx(1.25)
        assert rate_parameter("commutative-prediction", p) == pytest.approx(2.0)
        assert rate_parameter("commutative-estimation-rkhs", p) == pytest.approx(2.0)
        assert rate_parameter("noncommutative-prediction", dict(b=6, s=1, nu=1)) == 0.5

    def test_rkhs_needs_alpha_half(self):
        with pytest.raises(ValueError):
            rate_parameter("commutative-estimation-rkhs", dict(t=4, c=2, alpha=0.3, nu=1))

    def test_exponent_formula(self):
        assert schedule_exponent("commutative-estimation", COMM) == pytest.approx(6 / 7)
        assert schedule_exponent("noncommutative-prediction", dict(b=6, s=1, nu=1)) == pytest.approx(6 / 13)

    def test_unknown_setting(self):
        with pytest.raises(ValueError):
            rate_parameter("sideways", COMM)


class TestOracle:
    def test_noiseless_picks_smallest(self):
        ds = gen_dataset(Scenario(M=8, sigma=0.0, seed=4), 64)
        grid = [10.0**-k for k in range(2, 8)]
        assert choose_lambda_oracle(ds.truth, ds, CUTOFF, "l2", grid) == grid[-1]

    def test_single_point(self):
        ds = gen_dataset(Scenario(M=8, seed=4), 64)
        assert choose_lambda_oracle(ds.truth, ds, TIKHONOV, "pred", [0.3]) == 0.3

    def test_callable_metric(self):
        ds = gen_dataset(Scenario(M=8, seed=4), 64)
        lam = choose_lambda_oracle(ds.truth, ds, TIKHONOV,
                                   lambda d, truth: float(abs(d[0])), [1e-1, 1e-3])
        assert lam in (1e-1, 1e-3)

    def test_empty_grid(self):
        ds = gen_dataset(Scenario(M=8, seed=4), 16)
        with pytest.raises(ValueError):
            choose_lambda_oracle(ds.truth, ds, TIKHONOV, "l2", [])


class TestConcentrationHelpers:
    def test_noise_term_scale(self):
        # the noise term T^{1/2}(R_hat - C_hat beta*) has covariance sigma^2 Lambda_hat / n
        sc = Scenario(M=8, seed=21)
        ds = gen_dataset(sc, 2000)
        truth = ds.truth
        noise = ds.y - ds.x_coeffs @ truth.beta_star
        root = frac_power(truth.T, 0.5).matrix
        term = root @ (ds.x_coeffs.T @ noise / 2000)
        direct = root @ (empirical_xy(ds.x_coeffs, ds.y)
                         - empirical_covariance(ds.x_coeffs).matrix @ truth.beta_star)
        np.testing.assert_allclose(term, direct, atol=1e-12)


class TestProbes:
    def test_noise_term_vanishes_without_noise(self):
        ds = gen_dataset(Scenario(M=16, sigma=0.0, seed=2), 80)
        tr = ds.truth
        assert noise_term_norm(tr.T, tr.Lambda, ds.x_coeffs, ds.y, tr.beta_star, 1e-3) <= 1e-12

    def test_noise_term_is_linear_in_noise(self):
        sc = Scenario(M=16, sigma=1.0, seed=2)
        ds = gen_dataset(sc, 80)
        tr = ds.truth
        signal = ds.x_coeffs @ tr.beta_star
        y2 = signal + 2.0 * (ds.y - signal)
        a = noise_term_norm(tr.T, tr.Lambda, ds.x_coeffs, ds.y, tr.beta_star, 1e-3)
        b = noise_term_norm(tr.T, tr.Lambda, ds.x_coeffs, y2, tr.beta_star, 1e-3)
        assert b == pytest.approx(2.0 * a, rel=1e-10)

    def test_bound_formula(self):
        lam_op = SpectralOperator.diagonal([1.0, 0.25])
        # N(0.5) = 2/3 + 1/3 = 1
        assert noise_term_bound(lam_op, 2.0, 100, 0.5, 0.1) == pytest.approx(math.sqrt(4.0 / 10.0))
        with pytest.raises(ValueError):
            noise_term_bound(lam_op, 1.0, 100, 0.5, 1.5)

    def test_concentration_zero_at_truth(self, rng):
        a = random_psd(rng, 6)
        assert concentration_norm(a, a, 0.1) == 0.0

    def test_concentration_scalar(self):
        # (1 + 1)^{-1/2} (1 - 0.5) (1 + 1)^{-1/2} = 0.25
        assert concentration_norm(np.eye(1), np.array([[0.5]]), 1.0) == pytest.approx(0.25)

    def test_concentration_rejects_bad_lambda(self):
        with pytest.raises(ValueError):
            concentration_norm(np.eye(2), np.eye(2), 0.0)
