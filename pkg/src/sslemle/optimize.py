"""Maximizers for likelihood surfaces on a Euclidean ball.

Three paths share one result type:

- ``maximize_smooth``: quasi-Newton (BFGS) ascent with a projected Armijo line search
- ``maximize_derivative_free``: adaptive Nelder-Mead, restarted from the best vertex
- ``grid_oracle``: exhaustive search for p <= 2, used to audit the other two
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize

from .errors import BadStartError, ConfigError, DimensionError, DomainError


logger = logging.getLogger(__name__)

ARMIJO_CONSTANT = 1e-4
BACKTRACK_FACTOR = 0.5
MAX_BACKTRACKS = 60
MAX_RESTARTS = 10_000
NELDER_MEAD_CYCLES = 8
MAX_GRID_RESOLUTION = 4001

SmoothObjective = Callable[[np.ndarray], Tuple[float, np.ndarray]]
ValueObjective = Callable[[np.ndarray], float]


@dataclass
class OptimizerConfig:
    """Stopping rules, restart count and feasible ball of an optimizer run."""
    gradient_tolerance: float = 1e-8
    max_iterations: int = 500
    restarts: int = 8
    search_radius: Optional[float] = None
    seed: int = 0
    simplex_tolerance: float = 1e-8
    n_jobs: int = 1

    def __post_init__(self):
        if not self.gradient_tolerance > 0.0 or not self.simplex_tolerance > 0.0:
            raise ConfigError("optimizer tolerances must be positive")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be positive, got {self.max_iterations}")
        if not 0 <= self.restarts <= MAX_RESTARTS:
            raise ConfigError(f"restarts must lie in [0, {MAX_RESTARTS}], got {self.restarts}")
        if self.search_radius is not None and not self.search_radius > 0.0:
            raise ConfigError(f"search_radius must be positive, got {self.search_radius}")
        if self.n_jobs < 1:
            raise ConfigError(f"n_jobs must be positive, got {self.n_jobs}")

    def with_radius(self, radius: Optional[float]) -> "OptimizerConfig":
        return OptimizerConfig(
            gradient_tolerance=self.gradient_tolerance,
            max_iterations=self.max_iterations,
            restarts=self.restarts,
            search_radius=radius,
            seed=self.seed,
            simplex_tolerance=self.simplex_tolerance,
            n_jobs=self.n_jobs,
        )


@dataclass
class OptimResult:
    """Best point found together with the diagnostics of the run that found it."""
    argmax: np.ndarray
    value: float
    gradient_norm: Optional[float]
    iterations: int
    converged: bool
    restart_index: int
    trace: List[float] = field(default_factory=list, repr=False)
    n_converged: int = 0
    grid_step: Optional[float] = None


def project_to_ball(x: np.ndarray, radius: Optional[float]) -> np.ndarray:
    """Euclidean rescale onto the closed ball ``{||x|| <= radius}``."""
    if radius is None:
        return x
    norm = float(np.linalg.norm(x))
    if norm <= radius:
        return x
    return x * (radius / norm)


def _restart_points(
    config: OptimizerConfig, x0: Optional[np.ndarray], dimension: int
) -> List[np.ndarray]:
    """Warm start first, then ``config.restarts`` draws uniform in the ball.

    Each draw uses its own stream derived from ``(seed, restart index)``.
    """
    points = []
    if x0 is not None:
        points.append(project_to_ball(np.asarray(x0, dtype=float).copy(), config.search_radius))
    center = points[0] if points else np.zeros(dimension)
    for k in range(config.restarts):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, k]))
        direction = rng.standard_normal(dimension)
        direction /= np.linalg.norm(direction)
        if config.search_radius is None:
            points.append(center + direction * rng.random() * max(1.0, float(np.linalg.norm(center))))
        else:
            points.append(direction * config.search_radius * rng.random() ** (1.0 / dimension))
    if not points:
        points.append(np.zeros(dimension))
    return points


def _pick_best(results: List[OptimResult]) -> OptimResult:
    """Highest value, then lexicographically smallest argmax; converged runs preferred."""
    pool = [r for r in results if r.converged] or results
    best = min(pool, key=lambda r: (-r.value, tuple(r.argmax)))
    best.n_converged = sum(r.converged for r in results)
    return best


def _run_restarts(
    run, objective, config: OptimizerConfig, x0: Optional[np.ndarray], dimension: int
) -> List[OptimResult]:
    """One run per start point on ``config.n_jobs`` threads; results keep restart order."""
    starts = _restart_points(config, x0, dimension)
    return Parallel(n_jobs=min(config.n_jobs, len(starts)), prefer="threads")(
        delayed(run)(objective, start, config, k) for k, start in enumerate(starts)
    )


def _projected_gradient_norm(x: np.ndarray, gradient: np.ndarray, radius: Optional[float]) -> float:
    return float(np.linalg.norm(project_to_ball(x + gradient, radius) - x))


def _bfgs_ascent(objective: SmoothObjective, x0: np.ndarray, config: OptimizerConfig, restart_index: int) -> OptimResult:
    """Projected BFGS from one start.

    Accepted steps never lower the objective, so ``trace`` is non-decreasing.
    The Armijo sufficient-increase test is relaxed by ``4 eps (1 + |f|)`` to
    absorb rounding near the optimum; a line search with no acceptable step
    ends the run.
    """
    radius = config.search_radius
    x = project_to_ball(x0, radius)
    value, gradient = objective(x)
    if not (math.isfinite(value) and np.all(np.isfinite(gradient))):
        raise BadStartError(f"objective is not finite at the start of restart {restart_index}")

    dim = x.shape[0]
    inverse_hessian = np.eye(dim)
    trace = [value]
    iterations = 0
    pg_norm = _projected_gradient_norm(x, gradient, radius)
    stationary_at_rounding = False

    while pg_norm > config.gradient_tolerance and iterations < config.max_iterations:
        direction = inverse_hessian @ gradient
        if gradient @ direction <= 0.0:
            inverse_hessian = np.eye(dim)
            direction = gradient.copy()

        accepted = False
        predicted_increase = 0.5 * float(gradient @ (project_to_ball(x + direction, radius) - x))
        for attempt in range(2):
            step = 1.0
            slack = 4.0 * np.finfo(float).eps * (1.0 + abs(value))
            for _ in range(MAX_BACKTRACKS):
                candidate = project_to_ball(x + step * direction, radius)
                cand_value, cand_gradient = objective(candidate)
                # slack only relaxes the sufficient-increase test; the value never drops
                moved = not np.array_equal(candidate, x)
                if moved and math.isfinite(cand_value) and cand_value >= value and (
                    cand_value >= value + ARMIJO_CONSTANT * float(gradient @ (candidate - x)) - slack
                ):
                    accepted = True
                    break
                step *= BACKTRACK_FACTOR
            if accepted or attempt == 1:
                break
            # steepest ascent retry
            inverse_hessian = np.eye(dim)
            direction = gradient.copy()

        if not accepted:
            # no representable ascent left: numerically stationary
            stationary_at_rounding = predicted_increase <= slack
            logger.debug(f"Restart {restart_index}: line search stalled at iteration {iterations}")
            break

        s = candidate - x
        y = gradient - cand_gradient
        x, value, gradient = candidate, cand_value, cand_gradient
        iterations += 1
        trace.append(value)
        pg_norm = _projected_gradient_norm(x, gradient, radius)

        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            rho = 1.0 / sy
            left = np.eye(dim) - rho * np.outer(s, y)
            inverse_hessian = left @ inverse_hessian @ left.T + rho * np.outer(s, s)

    converged = pg_norm <= config.gradient_tolerance or stationary_at_rounding
    logger.debug(
        f"Restart {restart_index}: value={value:.12g} |pg|={pg_norm:.3e} "
        f"iterations={iterations} converged={converged}"
    )
    return OptimResult(
        argmax=x,
        value=value,
        gradient_norm=pg_norm,
        iterations=iterations,
        converged=converged,
        restart_index=restart_index,
        trace=trace,
    )


def maximize_smooth(
    objective: SmoothObjective,
    config: OptimizerConfig,
    x0: Optional[np.ndarray] = None,
    dimension: Optional[int] = None,
) -> OptimResult:
    """Multi-start BFGS ascent of a differentiable objective.

    Args:
        objective: Callable returning ``(value, gradient)``
        config: Tolerances, restart count, seed and search radius
        x0: Warm start, tried first
        dimension: Parameter dimension when no warm start is given

    Returns:
        Best restart by value; ``converged`` is False if its iteration cap was hit

    Raises:
        BadStartError: the objective is not finite at a start point.
    """
    dimension = dimension if x0 is None else np.asarray(x0).shape[0]
    if dimension is None:
        raise DimensionError("maximize_smooth needs x0 or dimension")
    results = _run_restarts(_bfgs_ascent, objective, config, x0, dimension)
    best = _pick_best(results)
    logger.debug(f"Smooth ascent: best restart {best.restart_index}, {best.n_converged}/{len(results)} converged")
    return best


def _simplex_diameter(simplex: np.ndarray) -> float:
    diffs = simplex[:, None, :] - simplex[None, :, :]
    return float(np.sqrt(np.max(np.sum(diffs * diffs, axis=-1))))


def _nelder_mead_run(objective: ValueObjective, x0: np.ndarray, config: OptimizerConfig, restart_index: int) -> OptimResult:
    radius = config.search_radius
    dim = x0.shape[0]

    def negated(z: np.ndarray) -> float:
        inside = project_to_ball(z, radius)
        value = objective(inside)
        if not math.isfinite(value):
            return math.inf
        # outside the ball: value of the projection minus the distance to it
        return -value + float(np.linalg.norm(z - inside))

    x = project_to_ball(np.asarray(x0, dtype=float), radius)
    start_value = objective(x)
    if not math.isfinite(start_value):
        raise BadStartError(f"objective is not finite at the start of restart {restart_index}")

    xatol = config.simplex_tolerance / (2.0 * math.sqrt(dim))
    best_value = start_value
    trace = [start_value]
    iterations = 0
    diameter = math.inf
    step = 0.1 * max(1.0, float(np.linalg.norm(x)))
    for _ in range(NELDER_MEAD_CYCLES):
        simplex = np.vstack([x, x + step * np.eye(dim)])
        res = minimize(
            negated,
            x,
            method="Nelder-Mead",
            options={
                "adaptive": True,
                "xatol": xatol,
                "fatol": 1e-14,
                "maxiter": max(1, config.max_iterations * dim - iterations),
                "initial_simplex": simplex,
            },
        )
        iterations += int(res.nit)
        diameter = _simplex_diameter(res.final_simplex[0])
        candidate = project_to_ball(res.final_simplex[0][0], radius)
        value = objective(candidate)
        improved = value > best_value + 1e-12 * (1.0 + abs(best_value))
        if value >= best_value:
            x, best_value = candidate, value
        trace.append(best_value)
        if (diameter <= config.simplex_tolerance and not improved) or iterations >= config.max_iterations * dim:
            break
        step = max(10.0 * diameter, 1e-3 * max(1.0, float(np.linalg.norm(x))))

    converged = diameter <= config.simplex_tolerance
    logger.debug(
        f"Restart {restart_index}: value={best_value:.12g} diameter={diameter:.3e} "
        f"iterations={iterations} converged={converged}"
    )
    return OptimResult(
        argmax=x,
        value=best_value,
        gradient_norm=None,
        iterations=iterations,
        converged=converged,
        restart_index=restart_index,
        trace=trace,
    )


def maximize_derivative_free(
    objective: ValueObjective,
    config: OptimizerConfig,
    x0: Optional[np.ndarray] = None,
    dimension: Optional[int] = None,
) -> OptimResult:
    """Multi-start adaptive Nelder-Mead ascent; converged means simplex diameter <= tolerance."""
    dimension = dimension if x0 is None else np.asarray(x0).shape[0]
    if dimension is None:
        raise DimensionError("maximize_derivative_free needs x0 or dimension")
    results = _run_restarts(_nelder_mead_run, objective, config, x0, dimension)
    best = _pick_best(results)
    logger.debug(
        f"Derivative-free ascent: best restart {best.restart_index}, {best.n_converged}/{len(results)} converged"
    )
    return best


def grid_oracle(
    objective: ValueObjective, box: Sequence[Tuple[float, float]], resolution: int = 401
) -> OptimResult:
    """Exhaustive grid search with one dyadic refinement pass around the incumbent.

    Ties keep the lowest grid index (C order); the refinement only replaces the
    incumbent on a strict improvement.

    Raises:
        DimensionError: more than two coordinates.
    """
    dim = len(box)
    if dim < 1 or dim > 2:
        raise DimensionError(f"grid oracle supports p <= 2, got p = {dim}")
    if not 2 <= resolution <= MAX_GRID_RESOLUTION:
        raise DomainError(f"resolution must lie in [2, {MAX_GRID_RESOLUTION}], got {resolution}")
    lows = np.array([b[0] for b in box], dtype=float)
    highs = np.array([b[1] for b in box], dtype=float)

    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(lows, highs)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([axis.ravel() for axis in mesh], axis=1)
    values = np.array([objective(point) for point in points])
    first = int(np.argmax(values))
    incumbent, best_value = points[first], float(values[first])
    evaluations = len(points)

    steps = (highs - lows) / (resolution - 1)
    refinement = 1
    while 2 ** (refinement + 1) + 1 <= resolution:
        refinement += 1
    refined_steps = steps / 2**refinement
    fine_axes = [
        np.clip(c + np.arange(-(2**refinement), 2**refinement + 1) * h, lo, hi)
        for c, h, lo, hi in zip(incumbent, refined_steps, lows, highs)
    ]
    fine_mesh = np.meshgrid(*fine_axes, indexing="ij")
    fine_points = np.stack([axis.ravel() for axis in fine_mesh], axis=1)
    for point in fine_points:
        value = float(objective(point))
        evaluations += 1
        if value > best_value:
            incumbent, best_value = point, value

    logger.debug(f"Grid oracle: {evaluations} evaluations, best value {best_value:.12g}")
    return OptimResult(
        argmax=np.array(incumbent, dtype=float),
        value=best_value,
        gradient_norm=None,
        iterations=evaluations,
        converged=True,
        restart_index=0,
        n_converged=1,
        grid_step=float(np.max(refined_steps)),
    )
