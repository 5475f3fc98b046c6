"""Tests for the simulation grid, settings and empirical gains."""

import math

import numpy as np
import pandas as pd
import pytest

from sslemle.errors import ConfigError, DomainError, SingularMatrixError, SizingError
from sslemle.models import GaussianDesignModel, UniformDesignModel
from sslemle.montecarlo import (
    GainCurve,
    SimulationSetting,
    beta_grid,
    draw_sample,
    empirical_gain,
    run_coverage,
    run_logistic_gain,
    run_setting,
    table_setting,
)


class TestBetaGrid:
    """Tests for the fifteen regression vectors."""

    def test_norms(self):
        """Norms are k * 8 / 15 for k = 1..15."""
        grid = beta_grid(seed=1)
        assert len(grid) == 15
        norms = [np.linalg.norm(beta) for beta in grid]
        np.testing.assert_allclose(norms, 8.0 * np.arange(1, 16) / 15.0, rtol=1e-12)

    def test_unperturbed_directions(self):
        """Without perturbation the first direction is along (1, 1, 1)."""
        grid = beta_grid(seed=0, perturbation_sd=0.0)
        np.testing.assert_allclose(grid[0], np.full(3, 8.0 / 15.0 / math.sqrt(3.0)), rtol=1e-12)
        # corner (1, 1, 1) added to the base stays on the diagonal
        np.testing.assert_allclose(grid[8] / np.linalg.norm(grid[8]), np.full(3, 1.0 / math.sqrt(3.0)))

    def test_seeded(self):
        """The same seed gives the same grid, another seed a different one."""
        a, b, c = beta_grid(4), beta_grid(4), beta_grid(5)
        np.testing.assert_array_equal(np.vstack(a), np.vstack(b))
        assert not np.allclose(np.vstack(a), np.vstack(c))


class TestEmpiricalGain:
    """Tests for the determinant ratio of error covariances."""

    def test_identical_errors(self, rng):
        """Equal samples give a gain of one."""
        errors = rng.normal(size=(50, 3))
        assert empirical_gain(errors, errors) == pytest.approx(1.0)

    def test_halved_errors(self, rng):
        """Halving the p = 2 SSL errors quadruples the gain."""
        errors = rng.normal(size=(80, 2))
        assert empirical_gain(0.5 * errors, errors) == pytest.approx(4.0, rel=1e-12)

    def test_scalar_is_sd_ratio(self, rng):
        """With p = 1 the gain is the ratio of standard deviations."""
        ref = rng.normal(size=40)
        ssl = rng.normal(scale=0.3, size=40)
        assert empirical_gain(ssl[:, None], ref[:, None]) == pytest.approx(ref.std(ddof=1) / ssl.std(ddof=1))

    def test_too_few_replications(self, rng):
        """R <= p leaves the covariance singular by construction."""
        errors = rng.normal(size=(3, 3))
        with pytest.raises(SizingError):
            empirical_gain(errors, errors)

    def test_singular_covariance(self, rng):
        """A repeated error column is rejected."""
        base = rng.normal(size=(30, 1))
        with pytest.raises(SingularMatrixError):
            empirical_gain(np.hstack([base, base]), rng.normal(size=(30, 2)))


class TestSettings:
    """Tests for the six table settings."""

    def test_table_constants(self):
        """Table settings use sigma_eps = 0.8 sqrt(10) and mu_X = 5."""
        setting = table_setting(2, 0.2, 200)
        assert setting.m == 40
        model = setting.model(np.ones(3))
        assert isinstance(model, GaussianDesignModel)
        assert model.sigma_eps == pytest.approx(0.8 * math.sqrt(10.0))
        np.testing.assert_allclose(model.mu_x, 5.0)

    @pytest.mark.parametrize(
        "index,law,alpha,mean",
        [
            (1, GaussianDesignModel, 2.0, 0.0),
            (3, UniformDesignModel, 2.0, 0.0),
            (4, UniformDesignModel, 2.0, 5.0),
            (5, GaussianDesignModel, 1.0, 0.0),
            (6, GaussianDesignModel, 1.0, 5.0),
        ],
    )
    def test_laws(self, index, law, alpha, mean):
        """Each index maps to its covariate law and noise."""
        setting = table_setting(index, 0.6, 1000)
        model = setting.model(np.ones(3))
        assert isinstance(model, law)
        assert model.alpha == alpha
        np.testing.assert_allclose(model.covariate_mean(), mean, atol=1e-12)
        assert setting.is_laplace == (alpha == 1.0)
        assert setting.has_closed_form == (index in (1, 2))

    def test_laplace_noise_is_standardized(self):
        """Laplace settings use scale sigma_eps / sqrt(2)."""
        model = table_setting(5, 0.2, 200).model(np.ones(3))
        assert model.noise.d == pytest.approx(0.8 * math.sqrt(10.0) / math.sqrt(2.0))

    @pytest.mark.parametrize(
        "kwargs,error",
        [
            ({"index": 7, "lam": 0.2, "n": 200}, ConfigError),
            ({"index": 1, "lam": 1.0, "n": 200}, DomainError),
            ({"index": 1, "lam": 0.2, "n": 10}, SizingError),
            ({"index": 1, "lam": 0.2, "n": 200, "replications": 3}, SizingError),
            ({"index": 1, "lam": 0.2, "n": 200, "points": (15,)}, ConfigError),
        ],
    )
    def test_validation(self, kwargs, error):
        """Out-of-range settings are rejected."""
        with pytest.raises(error):
            SimulationSetting(**kwargs)

    def test_draw_sample_sizes(self, rng):
        """draw_sample returns m matched pairs and n unmatched rows."""
        model = table_setting(1, 0.2, 200).model(np.ones(3))
        sample = draw_sample(model, rng, 40, 200)
        assert (sample.m, sample.n_x, sample.n_y, sample.p) == (40, 200, 200, 3)


class TestRuns:
    """End-to-end simulation runs on small budgets."""

    @pytest.mark.slow
    def test_gain_curve(self, temp_dir):
        """A short run yields sorted rows with both gains and writes a CSV."""
        setting = SimulationSetting(index=1, lam=0.2, n=200, replications=30, points=(14, 0), seed=3)
        curve = run_setting(setting)
        assert [row.snr for row in curve.rows] == sorted(row.snr for row in curve.rows)
        for row in curve.rows:
            assert row.gain_empirical > 0.0
            assert row.gain_theoretical > 1.0
            assert row.gain_vs_mmle is None
            assert row.m == 40
        path = temp_dir / "curve.csv"
        curve.to_csv(path)
        frame = pd.read_csv(path)
        assert "lambda" in frame.columns
        assert len(frame) == 2

    @pytest.mark.slow
    def test_independent_of_thread_count(self):
        """Serial and threaded runs give identical numbers."""
        setting = SimulationSetting(index=2, lam=0.6, n=200, replications=12, points=(3,), seed=8)
        serial = run_setting(setting, n_jobs=1)
        threaded = run_setting(setting, n_jobs=3)
        assert serial.rows[0].gain_empirical == threaded.rows[0].gain_empirical

    @pytest.mark.slow
    def test_laplace_reports_matched_mle_gain(self):
        """Laplace settings also compare against the matched MLE."""
        setting = SimulationSetting(index=5, lam=0.6, n=200, replications=12, points=(7,), seed=2)
        row = run_setting(setting).rows[0]
        assert row.gain_theoretical is None
        assert row.gain_vs_mmle > 0.0

    @pytest.mark.slow
    def test_coverage_near_nominal(self):
        """The asymptotic ellipsoid covers beta0 at roughly the nominal rate."""
        setting = SimulationSetting(index=1, lam=0.2, n=1000, replications=500, points=(7,), seed=1)
        assert run_coverage(setting, 7, level=0.95, n_jobs=4) == pytest.approx(0.95, abs=0.03)

    @pytest.mark.slow
    def test_logistic_gain_grows_with_unmatched_data(self):
        """Logistic rows carry log10(m / n) and a positive gain."""
        rows = run_logistic_gain(m=100, n_values=(100, 5000), replications=40, seed=5)
        assert [row.log10_ratio for row in rows] == pytest.approx([0.0, math.log10(100 / 5000)])
        assert all(row.gain > 0.0 for row in rows)

    @pytest.mark.slow
    def test_logistic_gain_trend(self):
        """More unmatched data helps the logistic fit, beating the matched MLE at n = 10^4."""
        rows = run_logistic_gain(m=100, n_values=(1000, 10_000, 100_000), replications=100, seed=12, n_jobs=4)
        assert rows[1].gain > 1.0
        assert rows[2].gain > rows[0].gain

    @pytest.mark.slow
    def test_empirical_gain_tracks_theory(self):
        """Setting 1 at n = 5000 stays within 10% of the closed-form gain; lambda = 0.2 beats 0.6."""
        points = (0, 4, 7, 10, 14)
        curves = {
            lam: run_setting(
                SimulationSetting(index=1, lam=lam, n=5000, replications=500, points=points, seed=21), n_jobs=4
            )
            for lam in (0.2, 0.6)
        }
        for row in curves[0.2].rows:
            assert row.gain_empirical == pytest.approx(row.gain_theoretical, rel=0.1)
        for small, large in zip(curves[0.2].rows, curves[0.6].rows):
            assert small.gain_empirical > large.gain_empirical

    @pytest.mark.slow
    def test_laplace_gain_over_olse_exceeds_gain_over_mmle(self):
        """Against OLS the Laplace fit gains at least as much as against the matched MLE."""
        setting = SimulationSetting(index=5, lam=0.2, n=500, replications=200, points=(2, 7, 12), seed=9)
        for row in run_setting(setting, n_jobs=4).rows:
            assert row.gain_empirical >= row.gain_vs_mmle - 2.0 * row.mc_se

    def test_empty_curve_frame(self):
        """A curve without rows gives an empty frame."""
        assert GainCurve(setting_index=1).to_frame().empty
