"""Real-data protocol: full-data OLS pre-fit, then repeated small-matched / large-unmatched splits."""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .data.sample import DataBlock, SemiSupervisedSample, SplitSpec, nested_subsamples, standardize
from .errors import SimulationError, SizingError, SSLEMLEError
from .estimators import fit_olse, fit_sslemle
from .models.reports import CoefficientRecord, DataAppRow, EstimatorMethod
from .noise import NoiseDensity
from .optimize import OptimizerConfig


logger = logging.getLogger(__name__)

DEFAULT_UNMATCHED_COUNTS = (50, 100, 200, 400, 800, 1600)


@dataclass
class PrefitSummary:
    """OLS with intercept on every row of the dataset."""
    intercept: float
    coefficients: np.ndarray
    residual_sd: float
    r_squared: float
    rows: int


def prefit_full_data(dataset: DataBlock) -> PrefitSummary:
    """Fit OLS with intercept on all rows; residual sd uses ``N - p - 1`` degrees of freedom.

    Raises:
        SizingError: not enough rows for the residual degrees of freedom.
    """
    dof = dataset.rows - dataset.p - 1
    if dof < 1:
        raise SizingError(f"{dataset.rows} rows cannot support an intercept and {dataset.p} slopes")
    fit = fit_olse(SemiSupervisedSample.matched_only(dataset.x, dataset.y), with_intercept=True)
    residuals = dataset.y - fit.predict(dataset.x)
    rss = float(residuals @ residuals)
    centered = dataset.y - dataset.y.mean()
    summary = PrefitSummary(
        intercept=float(fit.intercept),
        coefficients=fit.beta,
        residual_sd=math.sqrt(rss / dof),
        r_squared=1.0 - rss / float(centered @ centered),
        rows=dataset.rows,
    )
    logger.info(
        f"Full-data OLS on {dataset.rows} rows: residual sd={summary.residual_sd:.4f}, R^2={summary.r_squared:.4f}"
    )
    return summary


@dataclass
class DataAppProtocol:
    """Sizes and noise of the repeated-split comparison."""
    matched_count: int = 10
    unmatched_counts: Sequence[int] = DEFAULT_UNMATCHED_COUNTS
    replications: int = 100
    train_fraction: float = 0.75
    # None means: use the residual sd of the full-data pre-fit
    noise_sd: Optional[float] = 4.558
    restarts: int = 0


@dataclass
class DataApplicationResult:
    prefit: PrefitSummary
    noise_sd: float
    rows: List[DataAppRow] = field(default_factory=list)
    coefficients: List[CoefficientRecord] = field(default_factory=list)

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.model_dump() for row in self.rows])

    def coefficient_frame(self) -> pd.DataFrame:
        records = []
        for record in self.coefficients:
            entry = record.model_dump(exclude={"coefficients"})
            entry["method"] = record.method.value
            entry.update({f"beta_{k + 1}": value for k, value in enumerate(record.coefficients)})
            records.append(entry)
        return pd.DataFrame(records)

    def write(self, summary_path: Path, coefficients_path: Optional[Path] = None) -> None:
        summary_path.parent.mkdir(parents=True, exist_ok=True)
        self.summary_frame().to_csv(summary_path, index=False, float_format="%.10g")
        if coefficients_path is not None:
            coefficients_path.parent.mkdir(parents=True, exist_ok=True)
            self.coefficient_frame().to_csv(coefficients_path, index=False, float_format="%.10g")


def _test_mse(test: DataBlock, beta: np.ndarray, intercept: float) -> float:
    residuals = test.y - (test.x @ beta + intercept)
    return float(np.mean(residuals**2))


def _fit_pair(
    sample: SemiSupervisedSample, test: DataBlock, noise: NoiseDensity, config: OptimizerConfig
) -> Tuple[Optional[Tuple[np.ndarray, float, float]], Tuple[np.ndarray, float, float]]:
    olse = fit_olse(sample, with_intercept=True)
    olse_result = (olse.beta, float(olse.intercept), _test_mse(test, olse.beta, olse.intercept))
    try:
        standardized, transform = standardize(sample)
        fit = fit_sslemle(standardized, noise, config, with_intercept=True)
    except SSLEMLEError as e:
        logger.warning(f"SSLEMLE failed at n={sample.n}: {e.one_line()}")
        return None, olse_result
    beta, intercept = transform.to_original(fit.beta, fit.intercept)
    return (beta, intercept, _test_mse(test, beta, intercept)), olse_result


def _replicate(
    dataset: DataBlock, protocol: DataAppProtocol, noise: NoiseDensity, seed: int, replication: int
) -> Tuple[dict, List[CoefficientRecord]]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, replication]))
    spec = SplitSpec(
        train_fraction=protocol.train_fraction,
        matched_count=protocol.matched_count,
        unmatched_count=max(protocol.unmatched_counts),
        seed=seed,
    )
    samples, test = nested_subsamples(dataset, spec, list(protocol.unmatched_counts), rng)
    config = OptimizerConfig(restarts=protocol.restarts, seed=replication)
    outcomes = {}
    records = []
    for n, sample in zip(protocol.unmatched_counts, samples):
        ssl, olse = _fit_pair(sample, test, noise, config)
        outcomes[n] = (None if ssl is None else ssl[2], olse[2])
        for method, result in ((EstimatorMethod.SSLEMLE, ssl), (EstimatorMethod.OLSE, olse)):
            if result is None:
                continue
            records.append(
                CoefficientRecord(
                    replication=replication,
                    n=n,
                    method=method,
                    intercept=result[1],
                    coefficients=np.asarray(result[0]).tolist(),
                    test_mse=result[2],
                )
            )
    return outcomes, records


def run_data_application(
    dataset: DataBlock, protocol: DataAppProtocol, seed: int, n_jobs: int = 1
) -> DataApplicationResult:
    """Compare the semi-supervised fit with matched OLS on held-out rows.

    Each replication draws one train/test split and one matched set; the
    unmatched sets are nested in ``n``. Covariates are standardized before the
    semi-supervised fit and coefficients are reported in original units.

    Raises:
        SizingError: ``m + max(n)`` exceeds the training set.
        SimulationError: every replication failed for some ``n``.
    """
    prefit = prefit_full_data(dataset)
    noise_sd = protocol.noise_sd if protocol.noise_sd is not None else prefit.residual_sd
    noise = NoiseDensity.gaussian(noise_sd)
    train_size = int(round(protocol.train_fraction * dataset.rows))
    if protocol.matched_count + max(protocol.unmatched_counts) > train_size:
        raise SizingError(
            f"m + n = {protocol.matched_count + max(protocol.unmatched_counts)} exceeds the training set size {train_size}"
        )
    logger.info(
        f"Data application: {protocol.replications} replications, m={protocol.matched_count}, "
        f"n={list(protocol.unmatched_counts)}, noise sd={noise_sd:.4f}"
    )
    outcomes = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_replicate)(dataset, protocol, noise, seed, rep) for rep in range(protocol.replications)
    )

    result = DataApplicationResult(prefit=prefit, noise_sd=noise_sd)
    for _, records in outcomes:
        result.coefficients.extend(records)
    for n in protocol.unmatched_counts:
        pairs = [o[n] for o, _ in outcomes if o[n][0] is not None]
        failed = protocol.replications - len(pairs)
        if not pairs:
            raise SimulationError(f"every SSLEMLE fit failed at n={n}")
        ssl_mse = np.array([p[0] for p in pairs])
        ols_mse = np.array([p[1] for p in pairs])
        wins = int(np.sum(ssl_mse < ols_mse))
        row = DataAppRow(
            n=n,
            m=protocol.matched_count,
            replications=len(pairs),
            wins=wins,
            win_fraction=wins / len(pairs),
            mean_mse_sslemle=float(ssl_mse.mean()),
            mean_mse_olse=float(ols_mse.mean()),
            mse_ratio=float(ssl_mse.mean() / ols_mse.mean()),
            failed=failed,
        )
        logger.info(f"n={n}: SSLEMLE won {wins}/{len(pairs)}, MSE ratio {row.mse_ratio:.4f}")
        result.rows.append(row)
    return result
