"""JSON/CSV-ready report records produced by fits, gain calculations and simulations."""

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field


class EstimatorMethod(str, Enum):
    """Estimators the package can fit."""
    SSLEMLE = "SSLEMLE"
    MMLE = "mMLE"
    OLSE = "OLSE"
    DLSE = "DLSE"
    LOGISTIC_SSLEMLE = "logisticSSLEMLE"
    LOGISTIC_MLE = "logisticMLE"


class OptimizerDiagnostics(BaseModel):
    """Summary of the optimizer run behind a fit."""
    converged: bool = Field(..., description="Whether the best restart met its stopping rule")
    value: float = Field(..., description="Objective value at the returned point")
    gradient_norm: Optional[float] = Field(None, description="Projected gradient norm (smooth path)")
    iterations: int = Field(..., description="Iterations used by the best restart")
    restart_index: int = Field(..., description="Index of the restart that produced the argmax")
    restarts_converged: int = Field(0, description="Number of restarts that converged")
    search_radius: Optional[float] = Field(None, description="Radius of the feasible ball")


class EllipsoidReport(BaseModel):
    """Asymptotic confidence ellipsoid ``(b - beta)' S^-1 (b - beta) <= q / m``."""
    center: List[float] = Field(..., description="Ellipsoid center (the fitted coefficients)")
    level: float = Field(..., description="Coverage level")
    quantile: float = Field(..., description="Chi-square quantile with p degrees of freedom")
    matched_count: int = Field(..., description="Matched sample size m used to scale the ellipsoid")
    semi_axes: List[float] = Field(..., description="Semi-axis lengths, descending")
    axes: List[List[float]] = Field(..., description="Unit axis directions, one per semi-axis")
    volume: float = Field(..., description="Ellipsoid volume")


class FitReport(BaseModel):
    """Serializable result of one estimator fit."""
    method: EstimatorMethod = Field(..., description="Estimator that produced the fit")
    beta: List[float] = Field(..., description="Slope coefficients in original units")
    intercept: Optional[float] = Field(None, description="Fitted intercept, if the model has one")
    sigma: Optional[float] = Field(None, description="Noise standard deviation, if estimated")
    lambda_hat: Optional[float] = Field(None, description="Ratio m / n of matched to unmatched sizes")
    matched_count: int = Field(..., description="Matched sample size m")
    unmatched_count: int = Field(..., description="Unmatched sample size n")
    diagnostics: Optional[OptimizerDiagnostics] = Field(None, description="Optimizer diagnostics")
    ellipsoid: Optional[EllipsoidReport] = Field(None, description="Asymptotic confidence ellipsoid")
    warnings: List[str] = Field(default_factory=list, description="Recoverable conditions met during the fit")


class GainReport(BaseModel):
    """Statistical gain of the semi-supervised estimator over the matched one."""
    gain: float = Field(..., description="Gain G > 0; values above 1 mean a smaller confidence region")
    lam: float = Field(..., description="Limiting ratio lambda = m / n")
    eta: Optional[float] = Field(None, description="Squared signal-to-noise ratio")
    zeta: Optional[float] = Field(None, description="Whitened cosine between beta0 and mu_X")
    rho: Optional[float] = Field(None, description="Inverse squared whitened mean norm; None when mu_X = 0")
    source: str = Field(..., description="closed-form, matrix or empirical")
    small_lambda_gain: Optional[float] = Field(None, description="Small-lambda approximation of the gain")


class UnimodalityReport(BaseModel):
    """Shape of the gain as a function of eta when mu_X = 0."""
    lam: float = Field(..., description="Ratio lambda")
    eta_star: float = Field(..., description="Unique positive root of the gain-derivative polynomial")
    gain_star: float = Field(..., description="Gain at eta_star")
    small_lambda_eta_star: float = Field(..., description="Small-lambda optimum 1/sqrt(2)")
    small_lambda_coefficient: float = Field(..., description="G* * sqrt(lambda) in the small-lambda limit")
    increasing_below: bool = Field(..., description="Gain derivative positive on the sampled points below eta_star")
    decreasing_above: bool = Field(..., description="Gain derivative negative on the sampled points above eta_star")
    samples: int = Field(..., description="Number of sign-check points")


class GainCurveRow(BaseModel):
    """One beta0 point of a simulated gain curve."""
    snr: float
    gain_theoretical: Optional[float] = None
    gain_empirical: float
    gain_vs_mmle: Optional[float] = None
    mc_se: float
    n: int
    m: int
    lam: float = Field(..., serialization_alias="lambda")
    setting_index: int
    excluded: int = 0


class DataAppRow(BaseModel):
    """Per-n summary of the data-application protocol."""
    n: int
    m: int
    replications: int
    wins: int = Field(..., description="Replications where the semi-supervised test MSE beat OLSE")
    win_fraction: float
    mean_mse_sslemle: float
    mean_mse_olse: float
    mse_ratio: float = Field(..., description="Mean SSLEMLE MSE divided by mean OLSE MSE")
    failed: int = 0


class CoefficientRecord(BaseModel):
    """Coefficients of one replication of the data-application protocol."""
    replication: int
    n: int
    method: EstimatorMethod
    intercept: float
    coefficients: List[float]
    test_mse: float
