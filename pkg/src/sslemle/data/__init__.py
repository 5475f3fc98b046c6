"""Sample containers, CSV ingestion and the subsampling protocol."""

from .reader import load_csv, read_columns
from .sample import (
    DataBlock,
    SemiSupervisedSample,
    SplitSpec,
    Standardization,
    nested_subsamples,
    standardize,
    subsample_protocol,
)

__all__ = [
    "load_csv",
    "read_columns",
    "DataBlock",
    "SemiSupervisedSample",
    "SplitSpec",
    "Standardization",
    "nested_subsamples",
    "standardize",
    "subsample_protocol",
]
