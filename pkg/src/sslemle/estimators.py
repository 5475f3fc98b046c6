"""Estimators: semi-supervised MLE, matched MLE, OLSE, DLSE and the logistic variants."""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import linprog

from .data.sample import SemiSupervisedSample
from .errors import DomainError, EstimationError, RankDeficientError, SizingError
from .likelihood import (
    LikelihoodContext,
    dlse_criterion,
    existence_radius,
    logistic_loglik_and_score,
    loglik,
    loglik_and_score,
    loglik_profile_sigma,
)
from .models.reports import EstimatorMethod, FitReport, OptimizerDiagnostics
from .noise import NoiseDensity
from .optimize import (
    OptimizerConfig,
    OptimResult,
    maximize_derivative_free,
    maximize_smooth,
)


logger = logging.getLogger(__name__)

DLSE_STARTS = 16
LOGISTIC_RADIUS = 50.0
IRLS_MAX_ITERATIONS = 100
IRLS_TOLERANCE = 1e-12


@dataclass
class RegressionFit:
    """Estimated coefficients with the diagnostics of the run that produced them."""
    method: EstimatorMethod
    beta: np.ndarray
    matched_count: int
    unmatched_count: int
    intercept: Optional[float] = None
    sigma: Optional[float] = None
    diagnostics: Optional[OptimResult] = None
    search_radius: Optional[float] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def lambda_hat(self) -> Optional[float]:
        if self.unmatched_count == 0:
            return None
        return self.matched_count / self.unmatched_count

    @property
    def converged(self) -> bool:
        return self.diagnostics is None or self.diagnostics.converged

    def coefficients(self) -> np.ndarray:
        """Intercept (when present) followed by the slopes."""
        if self.intercept is None:
            return self.beta
        return np.concatenate([[self.intercept], self.beta])

    def predict(self, x: np.ndarray) -> np.ndarray:
        fitted = np.atleast_2d(x) @ self.beta
        return fitted + (self.intercept or 0.0)

    def to_report(self) -> FitReport:
        diagnostics = None
        if self.diagnostics is not None:
            d = self.diagnostics
            diagnostics = OptimizerDiagnostics(
                converged=d.converged,
                value=d.value,
                gradient_norm=d.gradient_norm,
                iterations=d.iterations,
                restart_index=d.restart_index,
                restarts_converged=d.n_converged,
                search_radius=self.search_radius,
            )
        return FitReport(
            method=self.method,
            beta=self.beta.tolist(),
            intercept=self.intercept,
            sigma=self.sigma,
            lambda_hat=self.lambda_hat,
            matched_count=self.matched_count,
            unmatched_count=self.unmatched_count,
            diagnostics=diagnostics,
            warnings=list(self.warnings),
        )


def _split_intercept(theta: np.ndarray, with_intercept: bool):
    if with_intercept:
        return np.asarray(theta[1:], dtype=float), float(theta[0])
    return np.asarray(theta, dtype=float), None


def _least_squares(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least squares by Householder QR.

    Raises:
        RankDeficientError: fewer rows than columns or a numerically zero pivot.
    """
    m, p = x.shape
    if m < p:
        raise RankDeficientError(f"{m} matched rows cannot identify {p} coefficients")
    q, r = np.linalg.qr(x)
    pivots = np.abs(np.diag(r))
    if pivots.min() <= 1e-10 * pivots.max():
        raise RankDeficientError("matched design is rank deficient")
    return solve_triangular(r, q.T @ y)


def fit_olse(sample: SemiSupervisedSample, with_intercept: bool = False) -> RegressionFit:
    """Ordinary least squares on the matched sample."""
    design = sample.with_intercept() if with_intercept else sample
    theta = _least_squares(design.matched_x, design.matched_y)
    beta, intercept = _split_intercept(theta, with_intercept)
    return RegressionFit(
        method=EstimatorMethod.OLSE,
        beta=beta,
        intercept=intercept,
        matched_count=sample.m,
        unmatched_count=sample.n,
    )


def _maximize_likelihood(
    ctx: LikelihoodContext, config: OptimizerConfig, warm_start: np.ndarray
) -> tuple:
    try:
        certificate = existence_radius(ctx, seed=config.seed)
    except RankDeficientError as e:
        raise EstimationError(f"no maximizer guaranteed: {e.message}") from e
    run_config = config.with_radius(certificate.radius)

    if ctx.noise.alpha > 1.0:
        result = maximize_smooth(lambda b: loglik_and_score(ctx, b), run_config, x0=warm_start)
    else:
        result = maximize_derivative_free(lambda b: loglik(ctx, b), run_config, x0=warm_start)
    if result.n_converged == 0:
        raise EstimationError(
            f"none of the {config.restarts + 1} restarts converged (best value {result.value:.6g})",
            diagnostics=result,
        )
    return result, certificate.radius


def fit_sslemle(
    sample: SemiSupervisedSample,
    noise: NoiseDensity,
    config: Optional[OptimizerConfig] = None,
    with_intercept: bool = False,
) -> RegressionFit:
    """Maximize the combined log-likelihood over the existence ball.

    The smooth path is used when the density is differentiable everywhere
    (alpha > 1); the Laplace case goes through Nelder-Mead.

    Raises:
        EstimationError: the matched design is rank deficient or no restart converged.
    """
    config = config or OptimizerConfig()
    design = sample.with_intercept() if with_intercept else sample
    ctx = LikelihoodContext(design, noise)
    try:
        warm_start = _least_squares(design.matched_x, design.matched_y)
    except RankDeficientError as e:
        raise EstimationError(f"no maximizer guaranteed: {e.message}") from e

    logger.info(f"Fitting SSLEMLE with m={sample.m}, n={sample.n}, p={design.p}, alpha={noise.alpha:g}")
    result, radius = _maximize_likelihood(ctx, config, warm_start)
    beta, intercept = _split_intercept(result.argmax, with_intercept)
    logger.info(f"SSLEMLE finished: value={result.value:.10g} converged={result.converged}")
    return RegressionFit(
        method=EstimatorMethod.SSLEMLE,
        beta=beta,
        intercept=intercept,
        matched_count=sample.m,
        unmatched_count=sample.n,
        diagnostics=result,
        search_radius=radius,
    )


def fit_matched_mle(
    sample: SemiSupervisedSample,
    noise: NoiseDensity,
    config: Optional[OptimizerConfig] = None,
    with_intercept: bool = False,
) -> RegressionFit:
    """Maximum likelihood on the matched sample alone."""
    config = config or OptimizerConfig()
    matched = SemiSupervisedSample.matched_only(sample.matched_x, sample.matched_y)
    design = matched.with_intercept() if with_intercept else matched
    ctx = LikelihoodContext(design, noise)
    try:
        warm_start = _least_squares(design.matched_x, design.matched_y)
    except RankDeficientError as e:
        raise EstimationError(f"no maximizer guaranteed: {e.message}") from e
    result, radius = _maximize_likelihood(ctx, config, warm_start)
    beta, intercept = _split_intercept(result.argmax, with_intercept)
    return RegressionFit(
        method=EstimatorMethod.MMLE,
        beta=beta,
        intercept=intercept,
        matched_count=sample.m,
        unmatched_count=sample.n,
        diagnostics=result,
        search_radius=radius,
    )


def dlse_radius(sample: SemiSupervisedSample) -> float:
    """``2 sqrt(mean(Y~^2) / lambda_min(mean(X~X~')))``, which bounds ``||beta0||`` with margin."""
    second_moment = sample.unmatched_x.T @ sample.unmatched_x / sample.n_x
    smallest = float(np.linalg.eigvalsh(second_moment)[0])
    if smallest <= 0.0:
        raise RankDeficientError("unmatched covariates do not span the coefficient space")
    return 2.0 * math.sqrt(float(np.mean(sample.unmatched_y**2)) / smallest)


def fit_dlse(
    sample: SemiSupervisedSample,
    noise: NoiseDensity,
    config: Optional[OptimizerConfig] = None,
) -> RegressionFit:
    """Deconvolution least squares from the unmatched sample alone.

    Raises:
        SizingError: fewer than two unmatched observations.
        EstimationError: no start converged.
    """
    config = config or OptimizerConfig()
    if sample.n_x < 2 or sample.n_y < 2:
        raise SizingError(f"DLSE needs at least two unmatched observations, got {sample.n_y}")
    y_sorted = np.sort(sample.unmatched_y)
    x_tilde = sample.unmatched_x
    radius = dlse_radius(sample)
    run_config = OptimizerConfig(
        gradient_tolerance=config.gradient_tolerance,
        max_iterations=config.max_iterations,
        restarts=max(config.restarts, DLSE_STARTS),
        search_radius=radius,
        seed=config.seed,
        simplex_tolerance=config.simplex_tolerance,
    )
    logger.info(f"Fitting DLSE with n={sample.n}, p={sample.p}, {run_config.restarts} starts")
    result = maximize_derivative_free(
        lambda b: -dlse_criterion(x_tilde, y_sorted, noise, b), run_config, dimension=sample.p
    )
    if result.n_converged == 0:
        raise EstimationError("DLSE: no start converged", diagnostics=result)
    return RegressionFit(
        method=EstimatorMethod.DLSE,
        beta=result.argmax,
        matched_count=sample.m,
        unmatched_count=sample.n,
        diagnostics=result,
        search_radius=radius,
    )


def _check_binary(values: np.ndarray, label: str) -> None:
    if values.size and not np.all((values == 0.0) | (values == 1.0)):
        raise DomainError(f"{label} responses must be 0 or 1")


def matched_separable(x: np.ndarray, y: np.ndarray) -> bool:
    """True when some ``beta`` gives ``(2y - 1) beta'x >= 1`` on every matched row."""
    signs = 2.0 * y - 1.0
    outcome = linprog(
        c=np.zeros(x.shape[1]),
        A_ub=-(signs[:, None] * x),
        b_ub=-np.ones(x.shape[0]),
        bounds=[(None, None)] * x.shape[1],
        method="highs",
    )
    return outcome.status == 0


def fit_logistic_mle(sample: SemiSupervisedSample, with_intercept: bool = False) -> RegressionFit:
    """Matched-only logistic MLE by iteratively reweighted least squares."""
    design = sample.with_intercept() if with_intercept else sample
    x, y = design.matched_x, design.matched_y
    _check_binary(y, "matched")
    theta = np.zeros(design.p)
    converged = False
    iterations = 0
    for iterations in range(1, IRLS_MAX_ITERATIONS + 1):
        prob = 1.0 / (1.0 + np.exp(-(x @ theta)))
        weights = prob * (1.0 - prob)
        information = (x.T * weights) @ x
        try:
            step = np.linalg.solve(information, x.T @ (y - prob))
        except np.linalg.LinAlgError:
            break
        theta = theta + step
        if np.max(np.abs(step)) <= IRLS_TOLERANCE * (1.0 + np.max(np.abs(theta))):
            converged = True
            break

    matched = SemiSupervisedSample.matched_only(x, y)
    value, gradient = logistic_loglik_and_score(matched, theta)
    diagnostics = OptimResult(
        argmax=theta,
        value=value,
        gradient_norm=float(np.linalg.norm(gradient)),
        iterations=iterations,
        converged=converged,
        restart_index=0,
        n_converged=int(converged),
    )
    beta, intercept = _split_intercept(theta, with_intercept)
    fit = RegressionFit(
        method=EstimatorMethod.LOGISTIC_MLE,
        beta=beta,
        intercept=intercept,
        matched_count=sample.m,
        unmatched_count=sample.n,
        diagnostics=diagnostics,
    )
    if not converged:
        fit.warnings.append("IRLS did not converge")
    return fit


def fit_logistic_sslemle(
    sample: SemiSupervisedSample,
    config: Optional[OptimizerConfig] = None,
    with_intercept: bool = False,
) -> RegressionFit:
    """Maximize the semi-supervised logistic log-likelihood.

    A separable matched part is reported as a warning; the ball of radius
    ``config.search_radius`` (default 50) keeps the maximizer finite.

    Raises:
        DomainError: non-binary responses or a matched part without both classes.
    """
    config = config or OptimizerConfig()
    design = sample.with_intercept() if with_intercept else sample
    _check_binary(design.matched_y, "matched")
    _check_binary(design.unmatched_y, "unmatched")
    if design.m == 0 or np.all(design.matched_y == design.matched_y[0]):
        raise DomainError("matched logistic sample must contain both classes")

    warnings = []
    warm_start = np.zeros(design.p)
    if matched_separable(design.matched_x, design.matched_y):
        message = "matched sample is perfectly separable; the fit is held inside the search ball"
        logger.warning(message)
        warnings.append(message)
    else:
        reference = fit_logistic_mle(sample, with_intercept=with_intercept)
        if reference.converged:
            warm_start = reference.coefficients()

    radius = config.search_radius or LOGISTIC_RADIUS
    run_config = config.with_radius(radius)
    logger.info(f"Fitting logistic SSLEMLE with m={sample.m}, n={sample.n}, p={design.p}")
    result = maximize_smooth(lambda b: logistic_loglik_and_score(design, b), run_config, x0=warm_start)
    if result.n_converged == 0:
        raise EstimationError("logistic SSLEMLE: no restart converged", diagnostics=result)
    beta, intercept = _split_intercept(result.argmax, with_intercept)
    return RegressionFit(
        method=EstimatorMethod.LOGISTIC_SSLEMLE,
        beta=beta,
        intercept=intercept,
        matched_count=sample.m,
        unmatched_count=sample.n,
        diagnostics=result,
        search_radius=radius,
        warnings=warnings,
    )


def matched_residual_sd(sample: SemiSupervisedSample, with_intercept: bool = False) -> float:
    """Residual standard deviation of the matched OLS fit, ``m - p`` degrees of freedom."""
    fit = fit_olse(sample, with_intercept=with_intercept)
    residuals = sample.matched_y - fit.predict(sample.matched_x)
    dof = sample.m - sample.p - int(with_intercept)
    if dof < 1:
        raise SizingError(f"need more matched rows than coefficients to estimate sigma, got m={sample.m}")
    return math.sqrt(float(residuals @ residuals) / dof)


def fit_sslemle_unknown_sigma(
    sample: SemiSupervisedSample,
    alpha: float,
    config: Optional[OptimizerConfig] = None,
    with_intercept: bool = False,
) -> RegressionFit:
    """Joint maximization over ``(beta, log sigma)`` with the unit-variance density scaled by ``sigma``.

    Started from the matched OLS fit and its residual standard deviation.
    """
    config = config or OptimizerConfig()
    start_fit = fit_olse(sample, with_intercept=with_intercept)
    start_sigma = matched_residual_sd(sample, with_intercept=with_intercept)
    x0 = np.concatenate([start_fit.coefficients(), [math.log(start_sigma)]])

    def objective(params: np.ndarray) -> float:
        theta, log_sigma = params[:-1], params[-1]
        beta, intercept = _split_intercept(theta, with_intercept)
        return loglik_profile_sigma(sample, alpha, beta, math.exp(log_sigma), intercept or 0.0)

    logger.info(f"Fitting SSLEMLE with unknown sigma, start sigma={start_sigma:.6g}")
    result = maximize_derivative_free(objective, config.with_radius(None), x0=x0)
    if result.n_converged == 0:
        raise EstimationError("unknown-sigma SSLEMLE: no restart converged", diagnostics=result)
    beta, intercept = _split_intercept(result.argmax[:-1], with_intercept)
    return RegressionFit(
        method=EstimatorMethod.SSLEMLE,
        beta=beta,
        intercept=intercept,
        sigma=math.exp(float(result.argmax[-1])),
        matched_count=sample.m,
        unmatched_count=sample.n,
        diagnostics=result,
    )
