"""Typed records: population design models and report schemas."""

from .design import GaussianDesignModel, UniformDesignModel
from .reports import (
    CoefficientRecord,
    DataAppRow,
    EllipsoidReport,
    EstimatorMethod,
    FitReport,
    GainCurveRow,
    GainReport,
    OptimizerDiagnostics,
    UnimodalityReport,
)

__all__ = [
    "GaussianDesignModel",
    "UniformDesignModel",
    "CoefficientRecord",
    "DataAppRow",
    "EllipsoidReport",
    "EstimatorMethod",
    "FitReport",
    "GainCurveRow",
    "GainReport",
    "OptimizerDiagnostics",
    "UnimodalityReport",
]
