"""sslemle - semi-supervised linear regression from matched and unmatched samples."""

from .noise import NoiseDensity
from .data import SemiSupervisedSample, SplitSpec, load_csv, standardize, subsample_protocol
from .models import GainReport, GaussianDesignModel, UniformDesignModel
from .likelihood import LikelihoodContext, existence_radius, loglik, score, hessian
from .optimize import OptimizerConfig, OptimResult, grid_oracle, maximize_derivative_free, maximize_smooth
from .estimators import (
    RegressionFit,
    fit_dlse,
    fit_logistic_mle,
    fit_logistic_sslemle,
    fit_matched_mle,
    fit_olse,
    fit_sslemle,
    fit_sslemle_unknown_sigma,
)
from .asymptotics import (
    confidence_region,
    gain_analysis,
    gain_closed_form,
    gain_generic,
    gammas_gaussian,
    gammas_numeric,
    sigma_ssl,
)
from .montecarlo import beta_grid, empirical_gain, run_setting, table_setting
from .errors import SSLEMLEError

__version__ = "0.0.1"
__all__ = [
    "NoiseDensity",
    "SemiSupervisedSample", "SplitSpec", "load_csv", "standardize", "subsample_protocol",
    "GainReport", "GaussianDesignModel", "UniformDesignModel",
    "LikelihoodContext", "existence_radius", "loglik", "score", "hessian",
    "OptimizerConfig", "OptimResult", "grid_oracle", "maximize_derivative_free", "maximize_smooth",
    "RegressionFit", "fit_dlse", "fit_logistic_mle", "fit_logistic_sslemle", "fit_matched_mle",
    "fit_olse", "fit_sslemle", "fit_sslemle_unknown_sigma",
    "confidence_region", "gain_analysis", "gain_closed_form", "gain_generic",
    "gammas_gaussian", "gammas_numeric", "sigma_ssl",
    "beta_grid", "empirical_gain", "run_setting", "table_setting",
    "SSLEMLEError",
]
