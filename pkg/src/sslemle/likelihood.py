"""Empirical log-likelihood of the combined matched/unmatched sample and its relatives.

For a coefficient vector ``beta`` the criterion is

    l(beta) = 1/(n+m) * [ sum_j log( 1/n sum_i f(Y~_j - beta'X~_i) )
                          + sum_k log f(Y_k - beta'X_k) ]

The inner mixture over the unmatched covariates is evaluated in log space
block by block over ``j``, so memory stays bounded and nothing underflows.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.special import log_expit, logsumexp

from .data.sample import SemiSupervisedSample
from .errors import (
    DomainError,
    RankDeficientError,
    ShapeError,
    UnsupportedModelError,
    UnsupportedOrderError,
)
from .models.design import GaussianDesignModel, UniformDesignModel
from .noise import NoiseDensity


logger = logging.getLogger(__name__)

BLOCK_ROWS = 512
RANK_TOLERANCE = 1e-10
SPHERE_RESTARTS = 32

DesignModel = Union[GaussianDesignModel, UniformDesignModel]


@dataclass(frozen=True, eq=False)
class LikelihoodContext:
    """Sample plus noise density; the unmatched weight is ``n / (n + m)``."""

    sample: SemiSupervisedSample
    noise: NoiseDensity
    weight: float = field(init=False)

    def __post_init__(self):
        sample = self.sample
        if sample.n_x != sample.n_y:
            raise ShapeError(
                f"unmatched blocks must have a common size, got {sample.n_x} covariate rows "
                f"and {sample.n_y} responses"
            )
        if sample.m + sample.n == 0:
            raise ShapeError("sample has neither matched nor unmatched observations")
        object.__setattr__(self, "weight", sample.n / (sample.n + sample.m))

    @property
    def p(self) -> int:
        return self.sample.p

    def with_intercept(self) -> "LikelihoodContext":
        return LikelihoodContext(self.sample.with_intercept(), self.noise)


def _check_beta(ctx: LikelihoodContext, beta) -> np.ndarray:
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.shape != (ctx.p,):
        raise ShapeError(f"beta has shape {beta.shape}, expected ({ctx.p},)")
    return beta


def _unmatched_pass(
    ctx: LikelihoodContext, beta: np.ndarray, offset: float, order: int
) -> Tuple[float, Optional[np.ndarray], Optional[np.ndarray]]:
    """Sum over ``j`` of the log mixture and, on request, its gradient and Hessian."""
    sample, noise = ctx.sample, ctx.noise
    n, p = sample.n, sample.p
    fitted = sample.unmatched_x @ beta
    log_n = math.log(n)
    total = 0.0
    gradient = np.zeros(p) if order >= 1 else None
    curvature_weights = np.zeros(n) if order >= 2 else None
    outer = np.zeros((p, p)) if order >= 2 else None

    for start in range(0, n, BLOCK_ROWS):
        y_block = sample.unmatched_y[start:start + BLOCK_ROWS] - offset
        residuals = y_block[:, None] - fitted[None, :]
        log_f = noise.log_pdf(residuals)
        log_mix = logsumexp(log_f, axis=1)
        total += float(np.sum(log_mix - log_n))
        if order == 0:
            continue
        post = np.exp(log_f - log_mix[:, None])
        s = noise.score_ratio(residuals)
        # G_j = sum_i pi_ji s_ji X~_i
        g_rows = (post * s) @ sample.unmatched_x
        gradient -= g_rows.sum(axis=0)
        if order >= 2:
            curvature_weights += np.sum(post * noise.curvature_ratio(residuals), axis=0)
            outer += g_rows.T @ g_rows

    hessian = None
    if order >= 2:
        hessian = (sample.unmatched_x.T * curvature_weights) @ sample.unmatched_x - outer
    return total, gradient, hessian


def _matched_pass(
    ctx: LikelihoodContext, beta: np.ndarray, offset: float, order: int
) -> Tuple[float, Optional[np.ndarray], Optional[np.ndarray]]:
    sample, noise = ctx.sample, ctx.noise
    residuals = (sample.matched_y - offset) - sample.matched_x @ beta
    total = float(np.sum(noise.log_pdf(residuals)))
    gradient = hessian = None
    if order >= 1:
        gradient = -(noise.score_ratio(residuals) @ sample.matched_x)
    if order >= 2:
        # (log f)'' = f''/f - (f'/f)^2
        second = noise.curvature_ratio(residuals) - noise.score_ratio(residuals) ** 2
        hessian = (sample.matched_x.T * second) @ sample.matched_x
    return total, gradient, hessian


def _evaluate(ctx: LikelihoodContext, beta, order: int, offset: float = 0.0):
    if order >= 2 and ctx.noise.alpha < 2.0:
        raise UnsupportedOrderError(
            f"Hessian needs a twice differentiable density, got alpha = {ctx.noise.alpha}"
        )
    beta = _check_beta(ctx, beta)
    sample = ctx.sample
    value = 0.0
    gradient = np.zeros(ctx.p) if order >= 1 else None
    hessian = np.zeros((ctx.p, ctx.p)) if order >= 2 else None
    for enabled, pass_fn in ((sample.n > 0, _unmatched_pass), (sample.m > 0, _matched_pass)):
        if not enabled:
            continue
        v, g, h = pass_fn(ctx, beta, offset, order)
        value += v
        if g is not None:
            gradient += g
        if h is not None:
            hessian += h
    scale = 1.0 / (sample.n + sample.m)
    value *= scale
    if gradient is not None:
        gradient *= scale
    if hessian is not None:
        hessian = 0.5 * (hessian + hessian.T) * scale
    return value, gradient, hessian


def loglik(ctx: LikelihoodContext, beta) -> float:
    """Empirical log-likelihood at ``beta``."""
    return _evaluate(ctx, beta, order=0)[0]


def score(ctx: LikelihoodContext, beta) -> np.ndarray:
    """Analytic gradient of :func:`loglik`.

    Raises:
        NonDifferentiableError: alpha = 1 and some residual is exactly zero.
    """
    return _evaluate(ctx, beta, order=1)[1]


def loglik_and_score(ctx: LikelihoodContext, beta) -> Tuple[float, np.ndarray]:
    value, gradient, _ = _evaluate(ctx, beta, order=1)
    return value, gradient


def hessian(ctx: LikelihoodContext, beta) -> np.ndarray:
    """Analytic Hessian of :func:`loglik`; needs alpha >= 2."""
    return _evaluate(ctx, beta, order=2)[2]


def weighted_terms(ctx: LikelihoodContext, beta) -> Tuple[Optional[float], Optional[float]]:
    """Unmatched and matched mean terms; ``loglik = w * unmatched + (1 - w) * matched``.

    A term is None when its block is empty.
    """
    beta = _check_beta(ctx, beta)
    sample = ctx.sample
    unmatched = _unmatched_pass(ctx, beta, 0.0, 0)[0] / sample.n if sample.n else None
    matched = _matched_pass(ctx, beta, 0.0, 0)[0] / sample.m if sample.m else None
    return unmatched, matched


def loglik_intercept(ctx: LikelihoodContext, beta1: float, beta_rest) -> float:
    """Log-likelihood with residuals ``y - beta1 - beta_rest' x``."""
    return _evaluate(ctx, beta_rest, order=0, offset=float(beta1))[0]


def loglik_intercept_and_score(ctx: LikelihoodContext, theta) -> Tuple[float, np.ndarray]:
    """Value and gradient in ``theta = (beta1, beta_rest)`` on the augmented design."""
    return loglik_and_score(ctx.with_intercept(), theta)


def loglik_profile_sigma(
    sample: SemiSupervisedSample, alpha: float, beta, sigma: float, intercept: float = 0.0
) -> float:
    """Log-likelihood with the unit-variance exponential-power density scaled by ``1/sigma``.

    Raises:
        DomainError: ``sigma`` is not positive.
    """
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    ctx = LikelihoodContext(sample, NoiseDensity.standardized(alpha, sigma))
    return _evaluate(ctx, beta, order=0, offset=intercept)[0]


@dataclass(frozen=True, eq=False)
class ExistenceCertificate:
    """Ball ``B(0, radius)`` that contains a maximizer of the empirical log-likelihood."""

    radius: float
    a_star: float
    direction: np.ndarray


def _sphere_objective(x: np.ndarray, u: np.ndarray, alpha: float) -> float:
    return float(np.sum(np.abs(x @ u) ** alpha))


def _sphere_descent(x: np.ndarray, u: np.ndarray, alpha: float, iterations: int = 500) -> Tuple[np.ndarray, float]:
    """Projected gradient descent of ``u -> sum |u'X_k|^alpha`` on the unit sphere."""
    u = u / np.linalg.norm(u)
    value = _sphere_objective(x, u, alpha)
    step = 1.0 / max(float(np.sum(x * x)), 1e-300)
    for _ in range(iterations):
        proj = x @ u
        grad = alpha * (np.abs(proj) ** (alpha - 1.0) * np.sign(proj)) @ x
        tangent = grad - (grad @ u) * u
        if np.linalg.norm(tangent) <= 1e-14 * (1.0 + abs(value)):
            break
        improved = False
        while step > 1e-16:
            candidate = u - step * tangent
            candidate /= np.linalg.norm(candidate)
            cand_value = _sphere_objective(x, candidate, alpha)
            if cand_value < value:
                u, value = candidate, cand_value
                step *= 2.0
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return u, value


def existence_radius(ctx: LikelihoodContext, seed: int = 0) -> ExistenceCertificate:
    """Data-driven radius of a ball containing a maximizer.

    ``R = ((2^(alpha-1)/A*) sum |Y~_j|^alpha + (2^alpha/A*) sum |Y_k|^alpha)^(1/alpha)``
    where ``A*`` is the minimum of ``u -> sum_k |u'X_k|^alpha`` over unit vectors.

    Raises:
        RankDeficientError: the matched design does not have rank p.
    """
    sample, alpha = ctx.sample, ctx.noise.alpha
    x = sample.matched_x
    p = sample.p
    if sample.m < p:
        raise RankDeficientError(f"matched design has {sample.m} rows for {p} coefficients")
    singular = np.linalg.svd(x, compute_uv=False)
    if singular[-1] <= RANK_TOLERANCE * singular[0]:
        raise RankDeficientError(
            f"matched design is rank deficient (smallest/largest singular value "
            f"{singular[-1]:.3e}/{singular[0]:.3e}); a maximizer need not exist"
        )

    if p == 1:
        direction = np.ones(1)
        a_star = _sphere_objective(x, direction, alpha)
    else:
        rng = np.random.default_rng(seed)
        _, eigvecs = np.linalg.eigh(x.T @ x)
        starts = [eigvecs[:, 0]]
        if p == 2:
            angles = np.linspace(0.0, np.pi, 721)[:-1]
            sweep = np.column_stack([np.cos(angles), np.sin(angles)])
            sweep_values = np.sum(np.abs(x @ sweep.T) ** alpha, axis=0)
            starts.extend(sweep[np.argsort(sweep_values)[:4]])
        starts.extend(rng.standard_normal((SPHERE_RESTARTS, p)))
        direction, a_star = None, math.inf
        for start in starts:
            u, value = _sphere_descent(x, np.asarray(start, dtype=float), alpha)
            if value < a_star:
                direction, a_star = u, value

    total = (2.0 ** (alpha - 1.0) / a_star) * float(np.sum(np.abs(sample.unmatched_y) ** alpha))
    total += (2.0**alpha / a_star) * float(np.sum(np.abs(sample.matched_y) ** alpha))
    radius = total ** (1.0 / alpha)
    logger.debug(f"Existence radius R={radius:.6g} with A*={a_star:.6g}")
    return ExistenceCertificate(radius=radius, a_star=a_star, direction=direction)


def logistic_loglik_and_score(sample: SemiSupervisedSample, beta) -> Tuple[float, np.ndarray]:
    """Semi-supervised logistic log-likelihood and its gradient.

    The unmatched responses only see ``p(beta) = mean_i expit(beta'X~_i)``,
    contributing ``n1 log p + n0 log(1 - p)``; the matched part is the usual
    Bernoulli log-likelihood. Both are averaged over ``n + m``.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.shape != (sample.p,):
        raise ShapeError(f"beta has shape {beta.shape}, expected ({sample.p},)")
    total = 0.0
    gradient = np.zeros(sample.p)

    if sample.n > 0:
        z = sample.unmatched_x @ beta
        log_n = math.log(sample.n_x)
        ones = float(np.sum(sample.unmatched_y))
        zeros = sample.n_y - ones
        log_pos = log_expit(z)
        log_neg = log_expit(-z)
        log_p = logsumexp(log_pos) - log_n
        log_q = logsumexp(log_neg) - log_n
        total += ones * log_p + zeros * log_q
        # grad p / p = sum_i softmax(log_pos)_i (1 - s_i) x_i, and symmetrically for 1 - p
        w_pos = np.exp(log_pos - logsumexp(log_pos)) * np.exp(log_neg)
        w_neg = np.exp(log_neg - logsumexp(log_neg)) * np.exp(log_pos)
        gradient += ones * (w_pos @ sample.unmatched_x) - zeros * (w_neg @ sample.unmatched_x)

    if sample.m > 0:
        z = sample.matched_x @ beta
        y = sample.matched_y
        total += float(np.sum(y * log_expit(z) + (1.0 - y) * log_expit(-z)))
        gradient += (y - np.exp(log_expit(z))) @ sample.matched_x

    scale = 1.0 / (sample.n + sample.m)
    return total * scale, gradient * scale


def logistic_loglik(sample: SemiSupervisedSample, beta) -> float:
    return logistic_loglik_and_score(sample, beta)[0]


def dlse_criterion(x_tilde: np.ndarray, y_sorted: np.ndarray, noise: NoiseDensity, beta) -> float:
    """Ranked deconvolution least-squares criterion.

    ``(1/n) sum_j ( j/n - (1/n) sum_i F(Y~_(j) - beta'X~_i) )^2`` with
    ``y_sorted`` the unmatched responses in ascending order.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    n = y_sorted.shape[0]
    fitted = x_tilde @ beta
    ranks = np.arange(1, n + 1) / n
    total = 0.0
    for start in range(0, n, BLOCK_ROWS):
        block = y_sorted[start:start + BLOCK_ROWS]
        mixture_cdf = noise.cdf(block[:, None] - fitted[None, :]).mean(axis=1)
        total += float(np.sum((ranks[start:start + BLOCK_ROWS] - mixture_cdf) ** 2))
    return total / n


def _check_model(model) -> None:
    if not isinstance(model, (GaussianDesignModel, UniformDesignModel)):
        raise UnsupportedModelError(f"unsupported covariate law: {type(model).__name__}")


def population_terms(model: DesignModel, beta) -> Tuple[float, float]:
    """Population unmatched term ``E log f^Y_beta(Y~)`` and matched term ``E log f(Y - beta'X)``."""
    _check_model(model)
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    noise = model.noise
    y_mean, y_sd = model.response_moments()

    x_true, w_true = model.covariate_nodes(direction=model.beta0)
    t_true = x_true @ model.beta0
    x_fit, w_fit = model.covariate_nodes(direction=beta)
    t_fit = x_fit @ beta
    log_w_fit = np.log(w_fit)

    def integrand(y: float) -> float:
        density = float(np.sum(w_true * noise.pdf(y - t_true)))
        if density == 0.0:
            return 0.0
        log_mix = float(logsumexp(log_w_fit + noise.log_pdf(y - t_fit)))
        return density * log_mix

    unmatched, _ = quad(integrand, y_mean - 10.0 * y_sd, y_mean + 10.0 * y_sd, limit=400, epsabs=1e-10, epsrel=1e-10)

    delta = model.beta0 - beta
    x_delta, w_delta = model.covariate_nodes(direction=delta if np.any(delta) else None)
    shifts = x_delta @ delta
    bound = noise.d * 40.0 ** (1.0 / noise.alpha)
    abs_moments, _ = quad_vec(
        lambda e: np.abs(e + shifts) ** noise.alpha * noise.pdf(e), -bound, bound, epsabs=1e-12
    )
    matched = noise.log_c_alpha - noise.d ** (-noise.alpha) * float(w_delta @ abs_moments)
    return unmatched, matched


def population_loglik(model: DesignModel, beta, lam: float) -> float:
    """Limiting criterion ``1/(1+lam) * unmatched + lam/(1+lam) * matched``.

    Raises:
        UnsupportedModelError: the covariate law is neither Gaussian nor a uniform box.
    """
    unmatched, matched = population_terms(model, beta)
    return (unmatched + lam * matched) / (1.0 + lam)
