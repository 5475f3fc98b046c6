"""Population models of the covariate law used by the asymptotic and simulation code."""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss

from ..errors import DomainError, ShapeError
from ..noise import NoiseDensity


logger = logging.getLogger(__name__)

# Gauss-Hermite / Gauss-Legendre order along one axis
NODE_ORDER = 64
TENSOR_BUDGET = 20000


def _tensor_order(p: int, order: int) -> int:
    """Largest per-axis order keeping ``order**p`` within the tensor budget."""
    per_axis = int(math.floor(TENSOR_BUDGET ** (1.0 / p) + 1e-9))
    return max(4, min(order, per_axis))


def _tensor_grid(nodes: np.ndarray, weights: np.ndarray, p: int) -> Tuple[np.ndarray, np.ndarray]:
    mesh = np.meshgrid(*([nodes] * p), indexing="ij")
    points = np.stack([axis.ravel() for axis in mesh], axis=1)
    wmesh = np.meshgrid(*([weights] * p), indexing="ij")
    tensor_weights = np.prod(np.stack([axis.ravel() for axis in wmesh], axis=1), axis=1)
    return points, tensor_weights


@dataclass(frozen=True, eq=False)
class GaussianDesignModel:
    """Linear model with ``X ~ N(mu_x, sigma_x)`` and exponential-power noise of variance ``sigma_eps**2``.

    The derived scalars drive the closed-form gain:

    - ``eta = beta0' Sigma beta0 / sigma_eps**2`` (squared signal-to-noise ratio)
    - ``rho = 1 / (mu' Sigma^-1 mu)``, undefined when ``mu = 0``
    - ``zeta``, the whitened cosine between ``beta0`` and ``mu``
    """

    beta0: np.ndarray
    mu_x: np.ndarray
    sigma_x: np.ndarray
    sigma_eps: float
    alpha: float = 2.0
    _chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        beta0 = np.atleast_1d(np.asarray(self.beta0, dtype=float))
        mu_x = np.atleast_1d(np.asarray(self.mu_x, dtype=float))
        sigma_x = np.atleast_2d(np.asarray(self.sigma_x, dtype=float))
        p = beta0.shape[0]
        if mu_x.shape != (p,) or sigma_x.shape != (p, p):
            raise ShapeError(
                f"design dimensions disagree: beta0 {beta0.shape}, mu_x {mu_x.shape}, sigma_x {sigma_x.shape}"
            )
        if not np.allclose(sigma_x, sigma_x.T, atol=1e-12):
            raise DomainError("covariate covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(sigma_x)
        except np.linalg.LinAlgError as e:
            raise DomainError(f"covariate covariance is not positive definite: {e}") from e
        if self.sigma_eps <= 0.0:
            raise DomainError(f"sigma_eps must be positive, got {self.sigma_eps}")
        object.__setattr__(self, "beta0", beta0)
        object.__setattr__(self, "mu_x", mu_x)
        object.__setattr__(self, "sigma_x", sigma_x)
        object.__setattr__(self, "_chol", chol)

    @classmethod
    def isotropic(
        cls, beta0, mu: float = 0.0, sigma: float = 1.0, sigma_eps: float = 1.0, alpha: float = 2.0
    ) -> "GaussianDesignModel":
        """Model with ``mu_x = mu * 1`` and ``sigma_x = sigma**2 * I``."""
        beta0 = np.atleast_1d(np.asarray(beta0, dtype=float))
        p = beta0.shape[0]
        return cls(beta0, np.full(p, mu), sigma**2 * np.eye(p), sigma_eps, alpha)

    @property
    def p(self) -> int:
        return self.beta0.shape[0]

    @property
    def noise(self) -> NoiseDensity:
        return NoiseDensity.standardized(self.alpha, self.sigma_eps)

    @property
    def signal_variance(self) -> float:
        return float(self.beta0 @ self.sigma_x @ self.beta0)

    @property
    def eta(self) -> float:
        return self.signal_variance / self.sigma_eps**2

    @property
    def snr(self) -> float:
        return math.sqrt(self.eta)

    @property
    def mean_norm2(self) -> float:
        """Squared whitened mean ``mu' Sigma^-1 mu``."""
        return float(self.mu_x @ np.linalg.solve(self.sigma_x, self.mu_x))

    @property
    def rho(self) -> Optional[float]:
        norm2 = self.mean_norm2
        return None if norm2 == 0.0 else 1.0 / norm2

    @property
    def zeta(self) -> float:
        norm2 = self.mean_norm2
        signal = self.signal_variance
        if norm2 == 0.0 or signal == 0.0:
            return 0.0
        value = float(self.mu_x @ self.beta0) / math.sqrt(signal * norm2)
        return max(-1.0, min(1.0, value))

    def covariate_mean(self) -> np.ndarray:
        return self.mu_x

    def covariate_covariance(self) -> np.ndarray:
        return self.sigma_x

    def second_moment(self) -> np.ndarray:
        return self.sigma_x + np.outer(self.mu_x, self.mu_x)

    def response_moments(self) -> Tuple[float, float]:
        """Mean and standard deviation of the response ``beta0' X + eps``."""
        mean = float(self.beta0 @ self.mu_x)
        return mean, math.sqrt(self.signal_variance + self.sigma_eps**2)

    def covariate_nodes(self, direction: Optional[np.ndarray] = None, order: int = NODE_ORDER) -> Tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes and probability weights for the covariate law.

        With a ``direction`` the integrand is assumed to be affine in ``x`` times a
        function of ``direction' x``; the nodes are then the conditional means of
        ``X`` given ``direction' X = t_k`` at one-dimensional Gauss-Hermite points
        ``t_k``, which is exact for that class. Without a direction a tensor
        Gauss-Hermite grid is returned.
        """
        z, w = hermgauss(order)
        z = math.sqrt(2.0) * z
        w = w / math.sqrt(math.pi)
        if direction is not None:
            direction = np.asarray(direction, dtype=float)
            cov_d = self.sigma_x @ direction
            var_t = float(direction @ cov_d)
            if var_t <= 0.0:
                return self.mu_x[None, :].copy(), np.ones(1)
            # t_k - d'mu = sqrt(var_t) z_k
            points = self.mu_x[None, :] + np.outer(z / math.sqrt(var_t), cov_d)
            return points, w
        per_axis = _tensor_order(self.p, order)
        z, w = hermgauss(per_axis)
        grid, weights = _tensor_grid(math.sqrt(2.0) * z, w / math.sqrt(math.pi), self.p)
        return self.mu_x[None, :] + grid @ self._chol.T, weights

    def sample_covariates(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.mu_x[None, :] + rng.standard_normal((count, self.p)) @ self._chol.T

    def sample_pairs(self, rng: np.random.Generator, count: int) -> Tuple[np.ndarray, np.ndarray]:
        x = self.sample_covariates(rng, count)
        return x, x @ self.beta0 + self.noise.sample(rng, count)


@dataclass(frozen=True, eq=False)
class UniformDesignModel:
    """Linear model with independent ``X_i ~ U[lower_i, upper_i]`` covariates."""

    beta0: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sigma_eps: float
    alpha: float = 2.0

    def __post_init__(self):
        beta0 = np.atleast_1d(np.asarray(self.beta0, dtype=float))
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != beta0.shape or upper.shape != beta0.shape:
            raise ShapeError("uniform box bounds must match the dimension of beta0")
        if np.any(upper <= lower):
            raise DomainError("uniform box needs upper > lower on every axis")
        if self.sigma_eps <= 0.0:
            raise DomainError(f"sigma_eps must be positive, got {self.sigma_eps}")
        object.__setattr__(self, "beta0", beta0)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def centered(cls, beta0, mean: float = 0.0, sd: float = 1.0, sigma_eps: float = 1.0, alpha: float = 2.0) -> "UniformDesignModel":
        """Box with the given per-axis mean and standard deviation."""
        beta0 = np.atleast_1d(np.asarray(beta0, dtype=float))
        half = math.sqrt(3.0) * sd
        p = beta0.shape[0]
        return cls(beta0, np.full(p, mean - half), np.full(p, mean + half), sigma_eps, alpha)

    @property
    def p(self) -> int:
        return self.beta0.shape[0]

    @property
    def noise(self) -> NoiseDensity:
        return NoiseDensity.standardized(self.alpha, self.sigma_eps)

    @property
    def signal_variance(self) -> float:
        return float(self.beta0 @ self.covariate_covariance() @ self.beta0)

    @property
    def eta(self) -> float:
        return self.signal_variance / self.sigma_eps**2

    @property
    def snr(self) -> float:
        return math.sqrt(self.eta)

    def covariate_mean(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def covariate_covariance(self) -> np.ndarray:
        return np.diag((self.upper - self.lower) ** 2 / 12.0)

    def second_moment(self) -> np.ndarray:
        mean = self.covariate_mean()
        return self.covariate_covariance() + np.outer(mean, mean)

    def response_moments(self) -> Tuple[float, float]:
        mean = float(self.beta0 @ self.covariate_mean())
        return mean, math.sqrt(self.signal_variance + self.sigma_eps**2)

    def covariate_nodes(self, direction: Optional[np.ndarray] = None, order: int = NODE_ORDER) -> Tuple[np.ndarray, np.ndarray]:
        """Tensor Gauss-Legendre nodes on the box; ``direction`` is ignored."""
        per_axis = _tensor_order(self.p, order)
        z, w = leggauss(per_axis)
        grid, weights = _tensor_grid(z, w / 2.0, self.p)
        half = 0.5 * (self.upper - self.lower)
        return self.covariate_mean()[None, :] + grid * half[None, :], weights / weights.sum()

    def sample_covariates(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(count, self.p))

    def sample_pairs(self, rng: np.random.Generator, count: int) -> Tuple[np.ndarray, np.ndarray]:
        x = self.sample_covariates(rng, count)
        return x, x @ self.beta0 + self.noise.sample(rng, count)
