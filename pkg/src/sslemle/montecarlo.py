"""Seeded Monte Carlo runs: the six simulation settings, gain curves, coverage and the logistic gain."""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .asymptotics import asymptotic_covariances, confidence_region, gain_closed_form
from .data.sample import SemiSupervisedSample
from .errors import ConfigError, DomainError, SimulationError, SingularMatrixError, SizingError, SSLEMLEError
from .estimators import fit_logistic_mle, fit_logistic_sslemle, fit_matched_mle, fit_olse, fit_sslemle
from .models.design import GaussianDesignModel, UniformDesignModel
from .models.reports import GainCurveRow
from .optimize import OptimizerConfig


logger = logging.getLogger(__name__)

GRID_SIZE = 15
GRID_MAX_NORM = 8.0
GRID_BASE = np.array([2.0, 2.0, 2.0])
DESK_POINTS = (0, 4, 7, 10, 14)
EXCLUSION_LIMIT = 0.01
BOOTSTRAP_RESAMPLES = 200
# stream key for bootstrap draws, kept apart from replication indices
BOOTSTRAP_KEY = 2**31 - 1

TABLE_SIGMA_EPS = 0.8 * math.sqrt(10.0)
TABLE_MU_X = 5.0
TABLE_SIGMA_X = 1.0
TABLE_P = 3

# index -> (noise alpha, covariate law, centered at mu_X)
TABLE_SETTINGS = {
    1: (2.0, "gaussian", False),
    2: (2.0, "gaussian", True),
    3: (2.0, "uniform", False),
    4: (2.0, "uniform", True),
    5: (1.0, "gaussian", False),
    6: (1.0, "gaussian", True),
}

DesignModel = Union[GaussianDesignModel, UniformDesignModel]


def _grid_directions() -> np.ndarray:
    corners = np.array([[a, b, c] for a in (-1.0, 1.0) for b in (-1.0, 1.0) for c in (-1.0, 1.0)])
    faces = np.vstack([np.eye(3), -np.eye(3)])
    return np.vstack([GRID_BASE, GRID_BASE + corners, GRID_BASE + faces])


def beta_grid(seed: int, perturbation_sd: float = 0.1) -> List[np.ndarray]:
    """Fifteen regression vectors in R^3 with norms ``k * 8 / 15``, ``k = 1..15``.

    Directions are ``(2,2,2)`` plus the cube corners and face centers, each
    perturbed by ``N(0, perturbation_sd**2 I)`` and normalized.
    """
    rng = np.random.default_rng(seed)
    directions = _grid_directions()
    if perturbation_sd > 0.0:
        directions = directions + perturbation_sd * rng.standard_normal(directions.shape)
    directions = directions / np.linalg.norm(directions, axis=1, keepdims=True)
    norms = GRID_MAX_NORM * np.arange(1, GRID_SIZE + 1) / GRID_SIZE
    return [norm * direction for norm, direction in zip(norms, directions)]


@dataclass
class SimulationSetting:
    """One row of the simulation table at a fixed ``(lambda, n)``."""
    index: int
    lam: float
    n: int
    replications: int = 500
    points: Sequence[int] = DESK_POINTS
    seed: int = 0
    sigma_eps: float = TABLE_SIGMA_EPS
    mu_x: float = TABLE_MU_X
    sigma_x: float = TABLE_SIGMA_X
    perturbation_sd: float = 0.1
    restarts: int = 0

    def __post_init__(self):
        if self.index not in TABLE_SETTINGS:
            raise ConfigError(f"setting index must be one of {sorted(TABLE_SETTINGS)}, got {self.index}")
        if not 0.0 < self.lam < 1.0:
            raise DomainError(f"lambda must lie in (0, 1), got {self.lam}")
        if self.m < TABLE_P + 1:
            raise SizingError(f"m = round(lambda * n) = {self.m} must be at least {TABLE_P + 1}")
        if self.replications <= TABLE_P:
            raise SizingError(f"need more than {TABLE_P} replications, got {self.replications}")
        bad = [k for k in self.points if not 0 <= k < GRID_SIZE]
        if bad or not self.points:
            raise ConfigError(f"grid points must lie in [0, {GRID_SIZE - 1}], got {list(self.points)}")

    @property
    def m(self) -> int:
        return int(round(self.lam * self.n))

    @property
    def alpha(self) -> float:
        return TABLE_SETTINGS[self.index][0]

    @property
    def is_laplace(self) -> bool:
        return self.alpha == 1.0

    @property
    def has_closed_form(self) -> bool:
        alpha, law, _ = TABLE_SETTINGS[self.index]
        return alpha == 2.0 and law == "gaussian"

    def model(self, beta0: np.ndarray) -> DesignModel:
        alpha, law, centered = TABLE_SETTINGS[self.index]
        mean = self.mu_x if centered else 0.0
        if law == "gaussian":
            return GaussianDesignModel.isotropic(beta0, mean, self.sigma_x, self.sigma_eps, alpha)
        return UniformDesignModel.centered(beta0, mean, self.sigma_x, self.sigma_eps, alpha)

    def describe(self) -> str:
        alpha, law, centered = TABLE_SETTINGS[self.index]
        noise = "Laplace" if alpha == 1.0 else "Gaussian"
        mean = f"mean {self.mu_x:g}" if centered else "mean 0"
        return f"#{self.index}: {noise} noise, {law} covariates ({mean}), lambda={self.lam:g}, n={self.n}, m={self.m}"


def table_setting(
    index: int,
    lam: float,
    n: int,
    replications: int = 500,
    points: Optional[Sequence[int]] = None,
    seed: int = 0,
) -> SimulationSetting:
    """Setting ``index`` of the table with ``sigma_eps = 0.8 sqrt(10)``, ``mu_X = 5``, ``sigma_X = 1``, ``p = 3``."""
    return SimulationSetting(
        index=index,
        lam=lam,
        n=n,
        replications=replications,
        points=tuple(points) if points is not None else DESK_POINTS,
        seed=seed,
    )


def draw_sample(model: DesignModel, rng: np.random.Generator, m: int, n: int) -> SemiSupervisedSample:
    """Unmatched covariates, unmatched responses from fresh pairs, then matched pairs."""
    unmatched_x = model.sample_covariates(rng, n)
    _, unmatched_y = model.sample_pairs(rng, n)
    matched_x, matched_y = model.sample_pairs(rng, m)
    return SemiSupervisedSample(matched_x, matched_y, unmatched_x, unmatched_y)


def _replication_seed(seed: int, point: int, replication: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, point, replication])


def _replicate(setting: SimulationSetting, model: DesignModel, point: int, replication: int) -> Optional[dict]:
    rng = np.random.default_rng(_replication_seed(setting.seed, point, replication))
    sample = draw_sample(model, rng, setting.m, setting.n)
    config = OptimizerConfig(restarts=setting.restarts, seed=replication)
    noise = model.noise
    scale = math.sqrt(setting.m)
    try:
        errors = {"ssl": scale * (fit_sslemle(sample, noise, config).beta - model.beta0)}
        errors["ols"] = scale * (fit_olse(sample).beta - model.beta0)
        if setting.is_laplace:
            errors["mmle"] = scale * (fit_matched_mle(sample, noise, config).beta - model.beta0)
    except SSLEMLEError as e:
        logger.warning(f"Point {point} replication {replication} excluded: {e.one_line()}")
        return None
    return errors


def empirical_gain(errors_ssl: np.ndarray, errors_ref: np.ndarray) -> float:
    """``sqrt(det S_ref / det S_ssl)`` from sample covariances (denominator ``R - 1``).

    Raises:
        SizingError: no more replications than coefficients.
        SingularMatrixError: either sample covariance is singular.
    """
    errors_ssl = np.atleast_2d(np.asarray(errors_ssl, dtype=float))
    errors_ref = np.atleast_2d(np.asarray(errors_ref, dtype=float))
    for label, errors in (("SSLEMLE", errors_ssl), ("reference", errors_ref)):
        if errors.shape[0] <= errors.shape[1]:
            raise SizingError(f"{label} errors need more rows than columns, got shape {errors.shape}")
    logdets = []
    for label, errors in (("SSLEMLE", errors_ssl), ("reference", errors_ref)):
        sign, logdet = np.linalg.slogdet(np.atleast_2d(np.cov(errors, rowvar=False, ddof=1)))
        if sign <= 0.0 or not math.isfinite(logdet):
            raise SingularMatrixError(f"{label} error covariance is singular")
        logdets.append(logdet)
    return math.exp(0.5 * (logdets[1] - logdets[0]))


def _bootstrap_se(errors_ssl: np.ndarray, errors_ref: np.ndarray, rng: np.random.Generator) -> float:
    count = errors_ssl.shape[0]
    gains = []
    for _ in range(BOOTSTRAP_RESAMPLES):
        rows = rng.integers(0, count, size=count)
        try:
            gains.append(empirical_gain(errors_ssl[rows], errors_ref[rows]))
        except SingularMatrixError:
            continue
    return float(np.std(gains, ddof=1)) if len(gains) > 1 else math.nan


@dataclass
class GainCurve:
    """Gain curve of one setting, rows sorted by signal-to-noise ratio."""
    setting_index: int
    rows: List[GainCurveRow] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.model_dump(by_alias=True) for row in self.rows])

    def to_csv(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.10g")
        logger.info(f"Wrote {len(self.rows)} gain-curve rows to {path}")


def _collect(
    setting: SimulationSetting, model: DesignModel, point: int, n_jobs: int
) -> Tuple[dict, int]:
    outcomes = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_replicate)(setting, model, point, rep) for rep in range(setting.replications)
    )
    kept = [o for o in outcomes if o is not None]
    excluded = len(outcomes) - len(kept)
    if excluded >= EXCLUSION_LIMIT * setting.replications:
        raise SimulationError(
            f"point {point}: {excluded} of {setting.replications} replications failed, limit is "
            f"{EXCLUSION_LIMIT:.0%}"
        )
    if excluded:
        logger.warning(f"Point {point}: {excluded} replications excluded")
    stacked = {key: np.vstack([o[key] for o in kept]) for key in kept[0]} if kept else {}
    return stacked, excluded


def run_setting(setting: SimulationSetting, n_jobs: int = 1) -> GainCurve:
    """Simulate the empirical gain at every selected grid point of a setting.

    Results depend only on the setting's seed, never on ``n_jobs``.

    Raises:
        SimulationError: one percent or more of a point's replications failed.
    """
    grid = beta_grid(setting.seed, setting.perturbation_sd)
    lam_hat = setting.m / setting.n
    curve = GainCurve(setting_index=setting.index)
    logger.info(f"Running setting {setting.describe()} with {setting.replications} replications")
    for point in setting.points:
        model = setting.model(grid[point])
        errors, excluded = _collect(setting, model, point, n_jobs)
        gain = empirical_gain(errors["ssl"], errors["ols"])
        rng = np.random.default_rng(np.random.SeedSequence([setting.seed, point, BOOTSTRAP_KEY]))
        row = GainCurveRow(
            snr=model.snr,
            gain_theoretical=gain_closed_form(model, lam_hat).gain if setting.has_closed_form else None,
            gain_empirical=gain,
            gain_vs_mmle=empirical_gain(errors["ssl"], errors["mmle"]) if setting.is_laplace else None,
            mc_se=_bootstrap_se(errors["ssl"], errors["ols"], rng),
            n=setting.n,
            m=setting.m,
            lam=lam_hat,
            setting_index=setting.index,
            excluded=excluded,
        )
        logger.info(f"Point {point}: snr={row.snr:.4f} gain={row.gain_empirical:.4f}")
        curve.rows.append(row)
    curve.rows.sort(key=lambda r: r.snr)
    return curve


def _coverage_hit(setting: SimulationSetting, model: GaussianDesignModel, point: int, rep: int, covariance, level: float):
    rng = np.random.default_rng(_replication_seed(setting.seed, point, rep))
    sample = draw_sample(model, rng, setting.m, setting.n)
    try:
        fit = fit_sslemle(sample, model.noise, OptimizerConfig(restarts=setting.restarts, seed=rep))
    except SSLEMLEError as e:
        logger.warning(f"Coverage replication {rep} excluded: {e.one_line()}")
        return None
    return confidence_region(fit, covariance, level, setting.m).contains(model.beta0)


def run_coverage(setting: SimulationSetting, point_index: int, level: float = 0.95, n_jobs: int = 1) -> float:
    """Fraction of replications whose confidence ellipsoid contains ``beta0``.

    The ellipsoid uses the population covariance of the m-scaled estimator.
    """
    grid = beta_grid(setting.seed, setting.perturbation_sd)
    model = setting.model(grid[point_index])
    covariance = asymptotic_covariances(model, setting.m / setting.n).sigma_ssl_tilde
    hits = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_coverage_hit)(setting, model, point_index, rep, covariance, level)
        for rep in range(setting.replications)
    )
    kept = [h for h in hits if h is not None]
    if len(hits) - len(kept) >= EXCLUSION_LIMIT * setting.replications:
        raise SimulationError(f"{len(hits) - len(kept)} coverage replications failed")
    coverage = float(np.mean(kept))
    logger.info(f"Coverage at point {point_index}: {coverage:.4f} over {len(kept)} replications")
    return coverage


@dataclass
class LogisticGainRow:
    m: int
    n: int
    log10_ratio: float
    gain: float
    excluded: int


def _logistic_replicate(beta0: float, m: int, n: int, seed: int, rep: int) -> Optional[Tuple[float, float]]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, n, rep]))

    def pairs(count: int) -> Tuple[np.ndarray, np.ndarray]:
        x = rng.normal(1.0, 1.0, size=(count, 1))
        prob = 1.0 / (1.0 + np.exp(-beta0 * x[:, 0]))
        return x, (rng.random(count) < prob).astype(float)

    unmatched_x = rng.normal(1.0, 1.0, size=(n, 1))
    _, unmatched_y = pairs(n)
    matched_x, matched_y = pairs(m)
    sample = SemiSupervisedSample(matched_x, matched_y, unmatched_x, unmatched_y)
    try:
        ssl = fit_logistic_sslemle(sample, OptimizerConfig(restarts=0, seed=rep))
        ref = fit_logistic_mle(sample)
    except SSLEMLEError as e:
        logger.warning(f"Logistic replication n={n} rep={rep} excluded: {e.one_line()}")
        return None
    return float(ssl.beta[0]) - beta0, float(ref.beta[0]) - beta0


def run_logistic_gain(
    m: int = 100,
    n_values: Sequence[int] = (100, 500, 1000, 5000, 10_000, 50_000, 100_000),
    replications: int = 100,
    seed: int = 0,
    beta0: float = 2.0,
    n_jobs: int = 1,
) -> List[LogisticGainRow]:
    """Empirical gain of the logistic semi-supervised fit over the matched logistic MLE.

    ``p = 1``, ``X ~ N(1, 1)``; the gain is the ratio of error standard deviations.
    """
    rows = []
    for n in n_values:
        outcomes = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_logistic_replicate)(beta0, m, n, seed, rep) for rep in range(replications)
        )
        kept = np.array([o for o in outcomes if o is not None])
        if kept.shape[0] < 3:
            raise SimulationError(f"logistic gain at n={n}: only {kept.shape[0]} replications succeeded")
        gain = empirical_gain(kept[:, :1], kept[:, 1:])
        rows.append(LogisticGainRow(m=m, n=n, log10_ratio=math.log10(m / n), gain=gain, excluded=replications - kept.shape[0]))
        logger.info(f"Logistic gain n={n}: {gain:.4f}")
    return rows
