"""Exponential-power (generalized Gaussian) noise family.

The density is ``f(t) = c_alpha * exp(-|t / d|**alpha)`` with
``c_alpha = alpha / (2 d Gamma(1/alpha))``. ``alpha = 1`` is the Laplace
density with scale ``d`` and ``alpha = 2, d = sqrt(2) sigma`` is the centered
Gaussian with standard deviation ``sigma``.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import gammainc, gammaln

from .errors import DomainError, NonDifferentiableError, UnsupportedOrderError


logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class NoiseDensity:
    """Immutable member of the exponential-power family."""

    alpha: float
    d: float
    c_alpha: float = field(init=False)

    def __post_init__(self):
        if not (self.alpha >= 1.0 and math.isfinite(self.alpha)):
            raise DomainError(f"noise exponent alpha must be >= 1, got {self.alpha}")
        if not (self.d > 0.0 and math.isfinite(self.d)):
            raise DomainError(f"noise scale d must be positive, got {self.d}")
        log_c = math.log(self.alpha) - math.log(2.0 * self.d) - float(gammaln(1.0 / self.alpha))
        object.__setattr__(self, "c_alpha", math.exp(log_c))

    @classmethod
    def gaussian(cls, sigma: float) -> "NoiseDensity":
        """Centered normal with standard deviation ``sigma``."""
        return cls(alpha=2.0, d=math.sqrt(2.0) * sigma)

    @classmethod
    def laplace(cls, scale: float) -> "NoiseDensity":
        """Laplace density ``exp(-|t|/scale) / (2 scale)``."""
        return cls(alpha=1.0, d=scale)

    @classmethod
    def standardized(cls, alpha: float, sigma: float) -> "NoiseDensity":
        """Family member with exponent ``alpha`` and variance ``sigma**2``."""
        if sigma <= 0.0:
            raise DomainError(f"sigma must be positive, got {sigma}")
        log_ratio = float(gammaln(1.0 / alpha) - gammaln(3.0 / alpha))
        return cls(alpha=alpha, d=sigma * math.exp(0.5 * log_ratio))

    @property
    def is_integer_exponent(self) -> bool:
        return float(self.alpha).is_integer()

    @property
    def log_c_alpha(self) -> float:
        return math.log(self.c_alpha)

    def log_pdf(self, t: ArrayLike) -> ArrayLike:
        return self.log_c_alpha - np.power(np.abs(t) / self.d, self.alpha)

    def pdf(self, t: ArrayLike) -> ArrayLike:
        return np.exp(self.log_pdf(t))

    def score_ratio(self, t: ArrayLike) -> ArrayLike:
        """``f'(t) / f(t) = -alpha d^-alpha |t|^(alpha-1) sgn(t)``."""
        t = np.asarray(t, dtype=float)
        if self.alpha == 1.0:
            if np.any(t == 0.0):
                raise NonDifferentiableError("derivative of the Laplace density is undefined at t = 0")
            return -np.sign(t) / self.d
        scale = self.alpha * self.d ** (-self.alpha)
        return -scale * np.power(np.abs(t), self.alpha - 1.0) * np.sign(t)

    def curvature_ratio(self, t: ArrayLike) -> ArrayLike:
        """``f''(t) / f(t)``; needs a twice differentiable density."""
        t = np.asarray(t, dtype=float)
        if self.alpha < 2.0:
            raise UnsupportedOrderError(
                f"second derivative requires alpha >= 2, got alpha = {self.alpha}"
            )
        scale = self.alpha * self.d ** (-self.alpha)
        abs_t = np.abs(t)
        first = scale * np.power(abs_t, self.alpha - 1.0)
        second = (self.alpha - 1.0) * scale * np.power(abs_t, self.alpha - 2.0)
        return first * first - second

    def evaluate(self, t: ArrayLike, order: int = 0) -> ArrayLike:
        """Density (order 0) or its first or second derivative.

        Raises:
            NonDifferentiableError: order >= 1 at ``t = 0`` when ``alpha = 1``.
            UnsupportedOrderError: order not in {0, 1, 2}.
        """
        if order not in (0, 1, 2):
            raise UnsupportedOrderError(f"order must be 0, 1 or 2, got {order}")
        density = self.pdf(t)
        if order == 0:
            return density
        if order == 1:
            return self.score_ratio(t) * density
        if self.alpha == 1.0:
            t_arr = np.asarray(t, dtype=float)
            if np.any(t_arr == 0.0):
                raise NonDifferentiableError("second derivative of the Laplace density is undefined at t = 0")
            return density / self.d**2
        if self.alpha < 2.0:
            raise UnsupportedOrderError(f"second derivative requires alpha >= 2, got {self.alpha}")
        return self.curvature_ratio(t) * density

    def cdf(self, t: ArrayLike) -> ArrayLike:
        """``1/2 + sgn(t)/2 * P(1/alpha, |t/d|^alpha)``."""
        t = np.asarray(t, dtype=float)
        mass = gammainc(1.0 / self.alpha, np.power(np.abs(t) / self.d, self.alpha))
        result = 0.5 + 0.5 * np.sign(t) * mass
        return float(result) if result.ndim == 0 else result

    def variance(self) -> float:
        return self.d**2 * math.exp(float(gammaln(3.0 / self.alpha) - gammaln(1.0 / self.alpha)))

    def fisher_integral(self) -> float:
        """Closed form of ``integral (f')^2 / f``."""
        log_ratio = float(gammaln(2.0 - 1.0 / self.alpha) - gammaln(1.0 / self.alpha))
        return (self.alpha / self.d) ** 2 * math.exp(log_ratio)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """I.i.d. draws via ``|eps| = d * G**(1/alpha)``, ``G ~ Gamma(1/alpha, 1)``."""
        if count < 1:
            raise DomainError(f"sample count must be positive, got {count}")
        magnitude = self.d * np.power(rng.gamma(1.0 / self.alpha, 1.0, size=count), 1.0 / self.alpha)
        signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        return signs * magnitude

    def describe(self) -> str:
        return f"NoiseDensity(alpha={self.alpha:g}, d={self.d:.6g}, variance={self.variance():.6g})"
