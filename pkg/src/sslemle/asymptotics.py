"""Asymptotic covariances of the semi-supervised and matched estimators, and the statistical gain.

With ``lam = lim m/n``, the semi-supervised estimator satisfies
``sqrt(n+m) (b - beta0) -> N(0, Sigma_SSL)`` where

    A = Gamma1/(1+lam) + lam Sigma2/(1+lam)
    Sigma_SSL = A^-1 ((Gamma1 + Gamma2)/(1+lam) + lam Sigma2/(1+lam)) A^-1

and on the matched ``sqrt(m)`` scale ``Sigma~_SSL = lam/(1+lam) Sigma_SSL``
competes with ``Sigma_mMLE = Sigma2^-1``. The gain is
``G = sqrt(det Sigma_mMLE / det Sigma~_SSL)``.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
from scipy.integrate import quad_vec
from scipy.optimize import bisect
from scipy.special import gammainc, gammaincinv, gammaln

from .errors import DomainError, SingularMatrixError, UnsupportedModelError
from .models.design import GaussianDesignModel, UniformDesignModel
from .models.reports import EllipsoidReport, GainReport, UnimodalityReport
from .noise import NoiseDensity


logger = logging.getLogger(__name__)

DesignModel = Union[GaussianDesignModel, UniformDesignModel]

Y_TRUNCATION_SDS = 10.0
SIGN_CHECK_POINTS = 200
SMALL_LAMBDA_ETA_STAR = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class AsymptoticCovariances:
    sigma2: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    sigma_ssl: np.ndarray
    sigma_ssl_tilde: np.ndarray
    sigma_mmle: np.ndarray
    lam: float


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def _sqrtm(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Symmetric square root and inverse square root by eigendecomposition."""
    values, vectors = np.linalg.eigh(matrix)
    root = np.sqrt(np.clip(values, 0.0, None))
    return (vectors * root) @ vectors.T, (vectors / root) @ vectors.T


def sigma2(noise: NoiseDensity, second_moment: np.ndarray) -> np.ndarray:
    """Matched Fisher-type matrix ``(int f'^2/f) E[XX']``."""
    return noise.fisher_integral() * np.atleast_2d(np.asarray(second_moment, dtype=float))


def gammas_gaussian(model: GaussianDesignModel) -> Tuple[np.ndarray, np.ndarray]:
    """Closed-form ``(Gamma1, Gamma2)`` for Gaussian covariates and Gaussian noise.

    In whitened coordinates ``a = Sigma^1/2 beta0``, ``t = Sigma^-1/2 mu`` and
    with ``s = ||a||^2 + sigma_eps^2``:

        Gamma1_w = t t'/s + 2 a a'/s^2
        Gamma2_w = ||a||^2 t t'/s^2 + 2 ||a||^4 a a'/s^4

    mapped back by ``Sigma^1/2 (.) Sigma^1/2``.
    """
    if model.alpha != 2.0:
        raise UnsupportedModelError(
            f"closed-form Gamma matrices need Gaussian noise, got alpha = {model.alpha}; use gammas_numeric"
        )
    root, inv_root = _sqrtm(model.sigma_x)
    a = root @ model.beta0
    t = inv_root @ model.mu_x
    v = float(a @ a)
    s = v + model.sigma_eps**2
    g1_w = np.outer(t, t) / s + 2.0 * np.outer(a, a) / s**2
    g2_w = v * np.outer(t, t) / s**2 + 2.0 * v**2 * np.outer(a, a) / s**4
    return _symmetrize(root @ g1_w @ root), _symmetrize(root @ g2_w @ root)


def _density_slope(noise: NoiseDensity, t: np.ndarray) -> np.ndarray:
    """``f'(t)``, with the symmetric value 0 at the Laplace kink."""
    if noise.alpha == 1.0:
        return -np.sign(t) / noise.d * noise.pdf(t)
    return noise.evaluate(t, order=1)


def gammas_numeric(model: DesignModel, noise: Optional[NoiseDensity] = None) -> Tuple[np.ndarray, np.ndarray]:
    """``(Gamma1, Gamma2)`` by quadrature for Gaussian or uniform-box covariates.

    ``Gamma1 = int h(y) h(y)' / f^Y(y) dy`` with ``h(y) = int x f'(y - beta0'x) dP^X``;
    ``Gamma2 = E[psi(X) psi(X)']`` with
    ``psi(x) = -int h(y)/f^Y(y) f(y - beta0'x) dy``.
    """
    if not isinstance(model, (GaussianDesignModel, UniformDesignModel)):
        raise UnsupportedModelError(f"unsupported covariate law: {type(model).__name__}")
    noise = noise if noise is not None else model.noise
    p = model.p
    nodes, weights = model.covariate_nodes(direction=model.beta0)
    shifts = nodes @ model.beta0
    y_mean, y_sd = model.response_moments()
    lo, hi = y_mean - Y_TRUNCATION_SDS * y_sd, y_mean + Y_TRUNCATION_SDS * y_sd

    def score_parts(y: float) -> Tuple[np.ndarray, float]:
        residuals = y - shifts
        density = float(weights @ noise.pdf(residuals))
        h = (weights * _density_slope(noise, residuals)) @ nodes
        return h, density

    def gamma1_integrand(y: float) -> np.ndarray:
        h, density = score_parts(y)
        if density <= 0.0:
            return np.zeros(p * p)
        return np.outer(h, h).ravel() / density

    gamma1, _ = quad_vec(gamma1_integrand, lo, hi, epsabs=1e-10, epsrel=1e-10, limit=400)
    gamma1 = gamma1.reshape(p, p)

    def psi_integrand(y: float) -> np.ndarray:
        h, density = score_parts(y)
        if density <= 0.0:
            return np.zeros(shifts.shape[0] * p)
        ratio = h / density
        return -np.outer(noise.pdf(y - shifts), ratio).ravel()

    psi, _ = quad_vec(psi_integrand, lo, hi, epsabs=1e-10, epsrel=1e-10, limit=400)
    psi = psi.reshape(shifts.shape[0], p)
    gamma2 = (psi.T * weights) @ psi
    return _symmetrize(gamma1), _symmetrize(gamma2)


def sigma_ssl(gamma1: np.ndarray, gamma2: np.ndarray, sigma2_matrix: np.ndarray, lam: float) -> AsymptoticCovariances:
    """Sandwich covariance of the semi-supervised estimator.

    Raises:
        SingularMatrixError: ``Gamma1/(1+lam) + lam Sigma2/(1+lam)`` or ``Sigma2`` is not positive definite.
    """
    gamma1 = np.atleast_2d(np.asarray(gamma1, dtype=float))
    gamma2 = np.atleast_2d(np.asarray(gamma2, dtype=float))
    sigma2_matrix = np.atleast_2d(np.asarray(sigma2_matrix, dtype=float))
    bread = _symmetrize((gamma1 + lam * sigma2_matrix) / (1.0 + lam))
    meat = _symmetrize((gamma1 + gamma2 + lam * sigma2_matrix) / (1.0 + lam))
    try:
        np.linalg.cholesky(bread)
        np.linalg.cholesky(sigma2_matrix)
    except np.linalg.LinAlgError as e:
        raise SingularMatrixError(
            "the Hessian limit Gamma1/(1+lambda) + lambda Sigma2/(1+lambda) must be positive definite"
        ) from e
    bread_inv = np.linalg.inv(bread)
    sandwich = _symmetrize(bread_inv @ meat @ bread_inv)
    return AsymptoticCovariances(
        sigma2=sigma2_matrix,
        gamma1=gamma1,
        gamma2=gamma2,
        sigma_ssl=sandwich,
        sigma_ssl_tilde=(lam / (1.0 + lam)) * sandwich,
        sigma_mmle=_symmetrize(np.linalg.inv(sigma2_matrix)),
        lam=lam,
    )


def asymptotic_covariances(model: DesignModel, lam: float, numeric: bool = False) -> AsymptoticCovariances:
    """All covariance blocks for a population model; closed form when the model allows it."""
    if not numeric and isinstance(model, GaussianDesignModel) and model.alpha == 2.0:
        gamma1, gamma2 = gammas_gaussian(model)
    else:
        gamma1, gamma2 = gammas_numeric(model)
    return sigma_ssl(gamma1, gamma2, sigma2(model.noise, model.second_moment()), lam)


def gain_from_parameters(eta: float, zeta: float, rho: Optional[float], lam: float) -> float:
    """Closed-form gain for Gaussian design and noise.

    ``G = (1 + D1/lam + D2/lam^2) / sqrt(1 + N1/lam + N2/lam^2)`` where the
    trace and determinant terms depend on ``eta``, ``zeta`` and
    ``1/(1+rho)`` (taken as 0 when ``mu_X = 0``, i.e. ``rho`` is None).
    """
    ipr = 0.0 if rho is None else 1.0 / (1.0 + rho)
    e1 = eta + 1.0
    mean_factor = 1.0 + eta / e1
    slope_factor = 1.0 + eta**2 / e1**2
    mean_term = ipr / e1
    slope_term = 2.0 * eta / e1**2 * (1.0 - zeta**2 * ipr)
    d_trace = mean_term + slope_term
    d_det = (1.0 - zeta**2) * ipr * 2.0 * eta / e1**3
    n_trace = mean_term * mean_factor + slope_term * slope_factor
    n_det = d_det * mean_factor * slope_factor
    numerator = 1.0 + d_trace / lam + d_det / lam**2
    return numerator / math.sqrt(1.0 + n_trace / lam + n_det / lam**2)


def small_lambda_gain(eta: float, lam: float) -> float:
    """``sqrt(2 eta) / (sqrt(lam) sqrt(2 eta^2 + 2 eta + 1))``, the ``mu_X = 0`` small-lambda form."""
    return math.sqrt(2.0 * eta) / (math.sqrt(lam) * math.sqrt(2.0 * eta**2 + 2.0 * eta + 1.0))


def small_lambda_gain_general(eta: float, zeta: float, rho: Optional[float], lam: float) -> float:
    """Leading small-lambda term of the gain.

    Of order ``1/lam`` when ``mu_X != 0`` and ``|zeta| < 1``; otherwise the
    determinant terms vanish and the ``1/sqrt(lam)`` trace form is returned.
    """
    ipr = 0.0 if rho is None else 1.0 / (1.0 + rho)
    e1 = eta + 1.0
    spread = 1.0 - zeta**2
    if ipr > 0.0 and spread > 0.0:
        denom = (1.0 + rho) * (eta**2 + e1**2) * (2.0 * eta + 1.0)
        return math.sqrt(spread) * math.sqrt(2.0 * eta) / (lam * math.sqrt(denom))
    mean_term = ipr / e1
    slope_term = 2.0 * eta / e1**2 * (1.0 - zeta**2 * ipr)
    d_trace = mean_term + slope_term
    n_trace = mean_term * (1.0 + eta / e1) + slope_term * (1.0 + eta**2 / e1**2)
    if n_trace == 0.0:
        return 1.0
    return d_trace / math.sqrt(lam * n_trace)


def gain_zeta_profile(eta: float, rho: float, lam: float, zetas: Iterable[float]) -> List[float]:
    """Gain as a function of the whitened cosine with ``eta``, ``rho`` and ``lam`` held fixed."""
    return [gain_from_parameters(eta, float(z), rho, lam) for z in zetas]


def gain_closed_form(model: GaussianDesignModel, lam: float) -> GainReport:
    """Closed-form gain of a Gaussian-design, Gaussian-noise model."""
    if model.alpha != 2.0:
        raise UnsupportedModelError(f"closed-form gain needs Gaussian noise, got alpha = {model.alpha}")
    eta, zeta, rho = model.eta, model.zeta, model.rho
    gain = gain_from_parameters(eta, zeta, rho, lam)
    return GainReport(
        gain=gain,
        lam=lam,
        eta=eta,
        zeta=zeta,
        rho=rho,
        source="closed-form",
        small_lambda_gain=small_lambda_gain_general(eta, zeta, rho, lam),
    )


def gain_generic(covariances: AsymptoticCovariances) -> GainReport:
    """``G = sqrt(det Sigma_mMLE / det Sigma~_SSL)`` by log-determinants.

    Raises:
        SingularMatrixError: either covariance is not positive definite.
    """
    for name, matrix in (("Sigma_mMLE", covariances.sigma_mmle), ("Sigma~_SSL", covariances.sigma_ssl_tilde)):
        try:
            np.linalg.cholesky(matrix)
        except np.linalg.LinAlgError as e:
            raise SingularMatrixError(f"{name} is not positive definite") from e
    _, logdet_ref = np.linalg.slogdet(covariances.sigma_mmle)
    _, logdet_ssl = np.linalg.slogdet(covariances.sigma_ssl_tilde)
    gain = math.exp(0.5 * (logdet_ref - logdet_ssl))
    return GainReport(gain=gain, lam=covariances.lam, source="matrix")


def gain_polynomial(eta: float, lam: float) -> float:
    """``P(eta) = -4(1+lam) eta^3 - 3 lam eta^2 + 2(1+lam) eta + lam``; same sign as ``dG/d eta`` when ``mu_X = 0``."""
    return -4.0 * (1.0 + lam) * eta**3 - 3.0 * lam * eta**2 + 2.0 * (1.0 + lam) * eta + lam


def gain_analysis(lam: float) -> UnimodalityReport:
    """Locate the maximizing signal-to-noise ratio of the ``mu_X = 0`` gain and check unimodality."""
    eta_star = bisect(gain_polynomial, 0.0, 1.0, args=(lam,), xtol=1e-12)

    def gain(eta: float) -> float:
        return gain_from_parameters(eta, 0.0, None, lam)

    half = SIGN_CHECK_POINTS // 2
    below = np.geomspace(eta_star * 1e-3, eta_star * 0.98, half)
    above = np.geomspace(eta_star * 1.02, eta_star * 1e3, SIGN_CHECK_POINTS - half)

    def slope(eta: float) -> float:
        h = 1e-6 * eta
        return (gain(eta + h) - gain(eta - h)) / (2.0 * h)

    increasing = all(slope(e) > 0.0 for e in below)
    decreasing = all(slope(e) < 0.0 for e in above)
    if not (increasing and decreasing):
        logger.warning(f"Gain sign pattern around eta*={eta_star:.6g} not confirmed for lambda={lam}")
    return UnimodalityReport(
        lam=lam,
        eta_star=eta_star,
        gain_star=gain(eta_star),
        small_lambda_eta_star=SMALL_LAMBDA_ETA_STAR,
        small_lambda_coefficient=small_lambda_gain(SMALL_LAMBDA_ETA_STAR, 1.0),
        increasing_below=increasing,
        decreasing_above=decreasing,
        samples=SIGN_CHECK_POINTS,
    )


def chi2_quantile(level: float, dof: int) -> float:
    """Chi-square quantile via the inverse regularized lower incomplete gamma."""
    return 2.0 * float(gammaincinv(dof / 2.0, level))


def chi2_cdf(value: float, dof: int) -> float:
    return float(gammainc(dof / 2.0, value / 2.0))


def unit_ball_volume(p: int) -> float:
    return math.exp(0.5 * p * math.log(math.pi) - float(gammaln(p / 2.0 + 1.0)))


@dataclass(frozen=True, eq=False)
class ConfidenceEllipsoid:
    """``{beta : (center - beta)' S^-1 (center - beta) <= quantile / m}``."""

    center: np.ndarray
    covariance: np.ndarray
    level: float
    quantile: float
    matched_count: int

    @property
    def p(self) -> int:
        return self.center.shape[0]

    def distance2(self, beta) -> float:
        diff = self.center - np.asarray(beta, dtype=float)
        return float(diff @ np.linalg.solve(self.covariance, diff))

    def contains(self, beta) -> bool:
        return self.distance2(beta) <= self.quantile / self.matched_count

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        """Semi-axis lengths (descending) and unit directions as columns."""
        values, vectors = np.linalg.eigh(self.covariance)
        order = np.argsort(values)[::-1]
        lengths = np.sqrt(values[order] * self.quantile / self.matched_count)
        return lengths, vectors[:, order]

    def volume(self) -> float:
        _, logdet = np.linalg.slogdet(self.covariance)
        radius2 = self.quantile / self.matched_count
        return math.exp(0.5 * logdet + 0.5 * self.p * math.log(radius2)) * unit_ball_volume(self.p)

    def to_report(self) -> EllipsoidReport:
        lengths, vectors = self.axes()
        return EllipsoidReport(
            center=self.center.tolist(),
            level=self.level,
            quantile=self.quantile,
            matched_count=self.matched_count,
            semi_axes=lengths.tolist(),
            axes=vectors.T.tolist(),
            volume=self.volume(),
        )


def confidence_region(fit, covariance: np.ndarray, level: float, m: int) -> ConfidenceEllipsoid:
    """Asymptotic confidence ellipsoid around a fit (or a coefficient vector).

    Raises:
        SingularMatrixError: ``covariance`` is not positive definite.
    """
    center = np.atleast_1d(np.asarray(getattr(fit, "beta", fit), dtype=float))
    covariance = np.atleast_2d(np.asarray(covariance, dtype=float))
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    try:
        np.linalg.cholesky(covariance)
    except np.linalg.LinAlgError as e:
        raise SingularMatrixError("confidence-region covariance is not positive definite") from e
    return ConfidenceEllipsoid(
        center=center,
        covariance=covariance,
        level=level,
        quantile=chi2_quantile(level, center.shape[0]),
        matched_count=m,
    )


def plug_in_model(beta: np.ndarray, covariates: np.ndarray, noise: NoiseDensity) -> GaussianDesignModel:
    """Gaussian-design model with the fitted coefficients and the pooled covariate moments."""
    covariates = np.atleast_2d(covariates)
    mean = covariates.mean(axis=0)
    cov = np.atleast_2d(np.cov(covariates, rowvar=False))
    return GaussianDesignModel(beta, mean, cov, math.sqrt(noise.variance()), noise.alpha)
