"""Tests for the ball-constrained maximizers."""

import math

import numpy as np
import pytest

from sslemle.errors import BadStartError, ConfigError, DimensionError, DomainError
from sslemle.optimize import (
    OptimizerConfig,
    grid_oracle,
    maximize_derivative_free,
    maximize_smooth,
    project_to_ball,
)


CENTER = np.array([1.0, -2.0])


def quadratic(x: np.ndarray):
    diff = x - CENTER
    return -float(diff @ diff), -2.0 * diff


def quadratic_value(x: np.ndarray) -> float:
    return quadratic(x)[0]


def negated_rosenbrock(x: np.ndarray):
    a, b = float(x[0]), float(x[1])
    value = -((1.0 - a) ** 2 + 100.0 * (b - a * a) ** 2)
    gradient = np.array([2.0 * (1.0 - a) + 400.0 * a * (b - a * a), -200.0 * (b - a * a)])
    return value, gradient


def bimodal(x: np.ndarray) -> float:
    """Two peaks at +-2; the one at -2 is higher."""
    t = float(x[0])
    return math.exp(-((t - 2.0) ** 2)) + 1.5 * math.exp(-((t + 2.0) ** 2))


class TestConfig:
    """Tests for optimizer settings."""

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"gradient_tolerance": 0.0},
            {"simplex_tolerance": -1.0},
            {"max_iterations": 0},
            {"restarts": -1},
            {"search_radius": 0.0},
            {"n_jobs": 0},
        ],
    )
    def test_invalid(self, kwargs):
        """Non-positive tolerances, caps and radii are rejected."""
        with pytest.raises(ConfigError):
            OptimizerConfig(**kwargs)

    def test_with_radius_keeps_other_fields(self):
        """with_radius copies everything but the radius."""
        config = OptimizerConfig(restarts=3, seed=7, n_jobs=2).with_radius(2.5)
        assert (config.restarts, config.seed, config.n_jobs, config.search_radius) == (3, 7, 2, 2.5)


class TestProjection:
    """Tests for the ball projection."""

    def test_inside_unchanged(self):
        """Points inside the ball are returned as is."""
        x = np.array([0.3, 0.4])
        assert project_to_ball(x, 1.0) is x

    def test_outside_rescaled(self):
        """Points outside land on the sphere along the same ray."""
        np.testing.assert_allclose(project_to_ball(np.array([3.0, 4.0]), 1.0), [0.6, 0.8])


class TestSmooth:
    """Tests for the quasi-Newton path."""

    def test_interior_maximum(self):
        """An unconstrained concave quadratic is maximized at its center."""
        result = maximize_smooth(quadratic, OptimizerConfig(restarts=2), x0=np.zeros(2))
        assert result.converged
        np.testing.assert_allclose(result.argmax, CENTER, atol=1e-7)
        assert np.all(np.diff(result.trace) >= 0.0)
        assert result.n_converged == 3

    def test_boundary_maximum(self):
        """With the center outside the ball the maximizer is its projection."""
        result = maximize_smooth(quadratic, OptimizerConfig(restarts=0, search_radius=1.0), x0=np.zeros(2))
        np.testing.assert_allclose(result.argmax, CENTER / np.linalg.norm(CENTER), atol=1e-6)
        assert np.linalg.norm(result.argmax) <= 1.0 + 1e-12

    def test_bad_start(self):
        """A non-finite start value is reported."""
        with pytest.raises(BadStartError):
            maximize_smooth(lambda x: (math.nan, np.zeros(1)), OptimizerConfig(restarts=0), x0=np.zeros(1))

    def test_needs_dimension(self):
        """Without x0 the dimension must be given."""
        with pytest.raises(DimensionError):
            maximize_smooth(quadratic, OptimizerConfig())

    def test_iteration_cap_reports_not_converged(self):
        """Running out of iterations returns the best point with converged False."""
        config = OptimizerConfig(restarts=0, max_iterations=3)
        result = maximize_smooth(negated_rosenbrock, config, x0=np.array([-1.2, 1.0]))
        assert not result.converged
        assert result.iterations <= 3
        assert result.n_converged == 0

    def test_trace_never_decreases(self):
        """Accepted steps on a curved valley never lower the objective."""
        result = maximize_smooth(negated_rosenbrock, OptimizerConfig(restarts=0), x0=np.array([-1.2, 1.0]))
        assert len(result.trace) > 10
        assert np.all(np.diff(result.trace) >= 0.0)

    def test_threaded_restarts_match_serial(self):
        """Restart results do not depend on the worker count."""
        serial = maximize_smooth(negated_rosenbrock, OptimizerConfig(restarts=5, seed=2, search_radius=3.0), dimension=2)
        threaded = maximize_smooth(
            negated_rosenbrock, OptimizerConfig(restarts=5, seed=2, search_radius=3.0, n_jobs=3), dimension=2
        )
        np.testing.assert_array_equal(serial.argmax, threaded.argmax)
        assert serial.restart_index == threaded.restart_index
        assert serial.n_converged == threaded.n_converged

    def test_seeded_restarts(self):
        """Restarts are a function of the seed alone."""
        a = maximize_smooth(quadratic, OptimizerConfig(restarts=4, seed=3), dimension=2)
        b = maximize_smooth(quadratic, OptimizerConfig(restarts=4, seed=3), dimension=2)
        np.testing.assert_array_equal(a.argmax, b.argmax)
        assert a.restart_index == b.restart_index


class TestDerivativeFree:
    """Tests for the Nelder-Mead path."""

    def test_interior_maximum(self):
        """The simplex search finds the quadratic's center."""
        result = maximize_derivative_free(quadratic_value, OptimizerConfig(restarts=1), x0=np.zeros(2))
        assert result.converged
        assert result.gradient_norm is None
        np.testing.assert_allclose(result.argmax, CENTER, atol=1e-6)

    def test_respects_ball(self):
        """Iterates never leave the feasible ball."""
        result = maximize_derivative_free(
            quadratic_value, OptimizerConfig(restarts=2, search_radius=1.0), x0=np.zeros(2)
        )
        assert np.linalg.norm(result.argmax) <= 1.0 + 1e-12
        np.testing.assert_allclose(result.argmax, CENTER / np.linalg.norm(CENTER), atol=1e-5)

    def test_restarts_escape_local_peak(self):
        """Starting at the lower peak, restarts in the ball reach the higher one."""
        config = OptimizerConfig(restarts=12, search_radius=4.0, seed=1)
        result = maximize_derivative_free(bimodal, config, x0=np.array([2.0]))
        assert result.argmax[0] == pytest.approx(-2.0, abs=1e-3)


class TestGridOracle:
    """Tests for exhaustive search."""

    def test_scalar(self):
        """The oracle finds the higher of two peaks."""
        result = grid_oracle(bimodal, [(-4.0, 4.0)], resolution=201)
        assert result.argmax[0] == pytest.approx(-2.0, abs=result.grid_step)
        assert result.grid_step < (8.0 / 200)

    def test_two_dimensions(self):
        """A two-coordinate quadratic is solved to the refined step."""
        result = grid_oracle(quadratic_value, [(-3.0, 3.0), (-3.0, 3.0)], resolution=61)
        np.testing.assert_allclose(result.argmax, CENTER, atol=result.grid_step)

    def test_constant_objective_keeps_first_point(self):
        """Ties resolve to the lowest grid index, the lower corner of the box."""
        result = grid_oracle(lambda x: 1.0, [(-1.0, 2.0), (0.5, 3.0)], resolution=11)
        np.testing.assert_array_equal(result.argmax, [-1.0, 0.5])
        assert result.value == 1.0

    def test_three_dimensions_refused(self):
        """The grid is limited to p <= 2."""
        with pytest.raises(DimensionError):
            grid_oracle(lambda x: 0.0, [(0.0, 1.0)] * 3)

    def test_resolution_bounds(self):
        """A single grid point is not a grid."""
        with pytest.raises(DomainError):
            grid_oracle(lambda x: 0.0, [(0.0, 1.0)], resolution=1)
