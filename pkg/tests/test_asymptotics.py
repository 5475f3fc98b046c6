"""Tests for asymptotic covariances, the statistical gain and confidence regions."""

import math

import numpy as np
import pytest

from sslemle.asymptotics import (
    asymptotic_covariances,
    chi2_cdf,
    chi2_quantile,
    confidence_region,
    gain_analysis,
    gain_closed_form,
    gain_from_parameters,
    gain_generic,
    gain_zeta_profile,
    gammas_gaussian,
    gammas_numeric,
    sigma_ssl,
    unit_ball_volume,
)
from sslemle.errors import DomainError, SingularMatrixError, UnsupportedModelError
from sslemle.models import GaussianDesignModel, UniformDesignModel


def _unit_model(mu: float = 0.0, beta0: float = 1.0) -> GaussianDesignModel:
    return GaussianDesignModel.isotropic(np.array([beta0]), mu, 1.0, 1.0, 2.0)


def _random_model(rng: np.random.Generator, p: int) -> GaussianDesignModel:
    a = rng.normal(size=(p, p))
    return GaussianDesignModel(
        beta0=rng.normal(size=p),
        mu_x=rng.normal(size=p),
        sigma_x=a @ a.T + p * np.eye(p),
        sigma_eps=float(rng.uniform(0.5, 2.0)),
    )


class TestGammas:
    """Tests for the unmatched information matrices."""

    @pytest.mark.parametrize("mu,gamma1,gamma2", [(0.0, 0.5, 0.125), (1.0, 1.0, 0.375)])
    def test_scalar_closed_form(self, mu, gamma1, gamma2):
        """Unit-parameter models give the hand-computed values."""
        g1, g2 = gammas_gaussian(_unit_model(mu))
        assert g1[0, 0] == pytest.approx(gamma1, rel=1e-12)
        assert g2[0, 0] == pytest.approx(gamma2, rel=1e-12)

    def test_zero_signal_centered(self):
        """With mu = 0 and beta0 = 0 the unmatched sample carries no information."""
        g1, g2 = gammas_gaussian(_unit_model(0.0, 0.0))
        np.testing.assert_array_equal(g1, 0.0)
        np.testing.assert_array_equal(g2, 0.0)

    def test_closed_form_needs_gaussian_noise(self):
        """Non-Gaussian noise goes through quadrature."""
        model = GaussianDesignModel.isotropic(np.array([1.0]), 0.0, 1.0, 1.0, 1.0)
        with pytest.raises(UnsupportedModelError):
            gammas_gaussian(model)

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_quadrature_matches_closed_form(self, p):
        """Numeric and closed-form matrices agree on random Gaussian models."""
        model = _random_model(np.random.default_rng(p), p)
        closed = gammas_gaussian(model)
        numeric = gammas_numeric(model)
        for exact, approx in zip(closed, numeric):
            np.testing.assert_allclose(approx, exact, atol=1e-3)

    def test_quadrature_psd_for_uniform_design(self):
        """Uniform-box matrices are symmetric positive semi-definite."""
        model = UniformDesignModel.centered(np.array([1.0, -0.5]), 0.0, 1.0, 1.0, 2.0)
        for matrix in gammas_numeric(model):
            np.testing.assert_allclose(matrix, matrix.T)
            assert np.linalg.eigvalsh(matrix).min() >= -1e-8

    def test_unsupported_law(self):
        """Covariate laws without quadrature nodes are refused."""
        with pytest.raises(UnsupportedModelError):
            gammas_numeric(object())


class TestCovariances:
    """Tests for the sandwich covariance."""

    def test_scalar_sigma_tilde(self):
        """Gamma1 = 0.5, Gamma2 = 0.125, Sigma2 = 1 at lambda = 0.2."""
        cov = sigma_ssl(0.5, 0.125, 1.0, 0.2)
        assert cov.sigma_ssl_tilde[0, 0] == pytest.approx(4.125 / 3.5**2, rel=1e-12)
        assert cov.sigma_ssl_tilde[0, 0] == pytest.approx(0.33673, abs=1e-5)

    def test_no_unmatched_information(self):
        """Gamma1 = Gamma2 = 0 reduces to the matched covariance."""
        cov = sigma_ssl(np.zeros((2, 2)), np.zeros((2, 2)), np.diag([2.0, 0.5]), 0.4)
        np.testing.assert_allclose(cov.sigma_ssl_tilde, cov.sigma_mmle, rtol=1e-12)

    def test_structure(self):
        """Sigma_mMLE inverts Sigma2 and the tilde form rescales Sigma_SSL."""
        model = _random_model(np.random.default_rng(7), 3)
        cov = asymptotic_covariances(model, 0.3)
        np.testing.assert_allclose(cov.sigma_mmle @ cov.sigma2, np.eye(3), atol=1e-10)
        np.testing.assert_allclose(cov.sigma_ssl_tilde, 0.3 / 1.3 * cov.sigma_ssl, rtol=1e-12)

    def test_continuous_near_one(self):
        """The tilde covariance is continuous as lambda approaches 1."""
        a = sigma_ssl(0.5, 0.125, 1.0, 0.999).sigma_ssl_tilde
        b = sigma_ssl(0.5, 0.125, 1.0, 1.0 - 1e-6).sigma_ssl_tilde
        np.testing.assert_allclose(a, b, rtol=1e-3)

    def test_singular_bread(self):
        """A singular Hessian limit is reported."""
        with pytest.raises(SingularMatrixError):
            sigma_ssl(np.zeros((2, 2)), np.zeros((2, 2)), np.diag([1.0, 0.0]), 0.5)


class TestGain:
    """Tests for the closed-form and matrix gains."""

    def test_centered_example(self):
        """mu = 0, eta = 1, lambda = 0.2 gives 3.5 / sqrt(4.125)."""
        report = gain_closed_form(_unit_model(), 0.2)
        assert report.gain == pytest.approx(3.5 / math.sqrt(4.125), rel=1e-12)
        assert report.gain == pytest.approx(1.72328, abs=1e-5)
        assert report.rho is None

    def test_shifted_example(self):
        """zeta = rho = eta = 1, lambda = 0.2 gives 3.5 / sqrt(4.4375)."""
        report = gain_closed_form(_unit_model(mu=1.0), 0.2)
        assert (report.eta, report.zeta, report.rho) == pytest.approx((1.0, 1.0, 1.0))
        assert report.gain == pytest.approx(1.66149, abs=1e-5)

    @pytest.mark.parametrize("mu", [0.0, 1.0])
    def test_matrix_path_reproduces_examples(self, mu):
        """The determinant ratio agrees with the formula."""
        model = _unit_model(mu)
        generic = gain_generic(asymptotic_covariances(model, 0.2))
        assert generic.gain == pytest.approx(gain_closed_form(model, 0.2).gain, abs=1e-9)

    def test_no_signal_no_gain(self):
        """mu = 0 and beta0 = 0 give G = 1."""
        assert gain_closed_form(_unit_model(0.0, 0.0), 0.5).gain == 1.0

    @pytest.mark.parametrize("seed", range(20))
    def test_formula_matches_matrix_path(self, seed):
        """Closed form and determinant ratio agree on random models."""
        rng = np.random.default_rng(100 + seed)
        model = _random_model(rng, int(rng.integers(1, 4)))
        lam = (0.1, 0.2, 0.6)[seed % 3]
        closed = gain_closed_form(model, lam).gain
        matrix = gain_generic(asymptotic_covariances(model, lam)).gain
        assert closed == pytest.approx(matrix, rel=1e-8)

    def test_zero_slope_with_mean(self):
        """beta0 = 0 and mu != 0 gives sqrt(1 + 1 / (lambda (1 + rho)))."""
        model = GaussianDesignModel.isotropic(np.zeros(2), 1.5, 1.0, 1.0, 2.0)
        lam, rho = 0.3, model.rho
        expected = math.sqrt(1.0 + 1.0 / (lam * (1.0 + rho)))
        assert gain_closed_form(model, lam).gain == pytest.approx(expected, rel=1e-8)
        assert gain_generic(asymptotic_covariances(model, lam)).gain == pytest.approx(expected, rel=1e-8)

    def test_large_snr_limit(self):
        """The gain tends to 1 as eta grows."""
        assert gain_from_parameters(1e6, 0.0, None, 0.2) == pytest.approx(1.0, abs=1e-4)

    def test_increasing_in_inverse_lambda(self):
        """More unmatched data per matched pair means more gain."""
        assert gain_from_parameters(1.0, 0.0, None, 0.2) > gain_from_parameters(1.0, 0.0, None, 0.6)

    def test_decreasing_in_alignment_at_small_lambda(self):
        """At small lambda the gain falls as |zeta| grows."""
        gains = gain_zeta_profile(1.0, 1.0, 0.01, [0.0, 0.3, 0.6, 0.9])
        assert all(a > b for a, b in zip(gains, gains[1:]))

    def test_scale_invariance(self):
        """Scaling both covariances by the same factor leaves G unchanged."""
        cov = asymptotic_covariances(_random_model(np.random.default_rng(3), 2), 0.2)
        scaled = sigma_ssl(4.0 * cov.gamma1, 4.0 * cov.gamma2, 4.0 * cov.sigma2, 0.2)
        assert gain_generic(scaled).gain == pytest.approx(gain_generic(cov).gain, rel=1e-10)

    def test_closed_form_needs_gaussian_noise(self):
        """The formula is only available for alpha = 2."""
        model = GaussianDesignModel.isotropic(np.array([1.0]), 0.0, 1.0, 1.0, 1.0)
        with pytest.raises(UnsupportedModelError):
            gain_closed_form(model, 0.2)


class TestUnimodality:
    """Tests for the shape of the centered gain in eta."""

    def test_sign_pattern(self):
        """The gain rises then falls around the polynomial root."""
        report = gain_analysis(0.2)
        assert 0.0 < report.eta_star < 1.0
        assert report.increasing_below
        assert report.decreasing_above
        assert report.gain_star >= gain_from_parameters(report.eta_star * 1.1, 0.0, None, 0.2)

    def test_small_lambda_limit(self):
        """eta* tends to 1/sqrt(2) and G* sqrt(lambda) to about 0.643."""
        report = gain_analysis(1e-4)
        assert report.eta_star == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-3)
        assert report.small_lambda_coefficient == pytest.approx(0.6436, abs=1e-4)
        assert report.gain_star * math.sqrt(1e-4) == pytest.approx(0.643, abs=2e-3)


class TestConfidenceRegion:
    """Tests for asymptotic confidence ellipsoids."""

    def test_chi2_quantile(self):
        """The 95% one-degree quantile is 3.841459."""
        assert chi2_quantile(0.95, 1) == pytest.approx(3.841459, abs=1e-5)
        assert chi2_cdf(chi2_quantile(0.9, 3), 3) == pytest.approx(0.9, abs=1e-12)

    def test_unit_ball_volume(self):
        """Volume of the unit disc is pi."""
        assert unit_ball_volume(2) == pytest.approx(math.pi)
        assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)

    def test_volume_ratio_is_inverse_gain(self):
        """SSL over matched ellipsoid volume equals 1/G."""
        model = _random_model(np.random.default_rng(11), 3)
        cov = asymptotic_covariances(model, 0.2)
        center = np.zeros(3)
        ssl = confidence_region(center, cov.sigma_ssl_tilde, 0.95, 100)
        ref = confidence_region(center, cov.sigma_mmle, 0.95, 100)
        assert ssl.volume() / ref.volume() == pytest.approx(1.0 / gain_generic(cov).gain, rel=1e-10)

    def test_contains_center_and_boundary(self):
        """Points inside the quantile radius are covered, points outside are not."""
        region = confidence_region(np.array([1.0, 2.0]), np.diag([4.0, 1.0]), 0.95, 25)
        assert region.contains([1.0, 2.0])
        radius = math.sqrt(region.quantile / 25)
        assert region.contains([1.0 + 1.99 * radius, 2.0])
        assert not region.contains([1.0, 2.0 + 1.01 * radius])
        report = region.to_report()
        assert report.semi_axes[0] == pytest.approx(2.0 * radius)

    def test_invalid_inputs(self):
        """Bad levels and non-PD matrices are rejected."""
        with pytest.raises(DomainError):
            confidence_region(np.zeros(1), np.eye(1), 1.0, 10)
        with pytest.raises(SingularMatrixError):
            confidence_region(np.zeros(2), np.diag([1.0, -1.0]), 0.9, 10)
