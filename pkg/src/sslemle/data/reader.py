"""CSV ingestion for regression datasets."""

import logging
from pathlib import Path
from typing import List, Union

import numpy as np
import pandas as pd

from ..errors import DatasetMissingError, ParseError, SchemaError
from .sample import DataBlock


logger = logging.getLogger(__name__)


def read_columns(path: Union[str, Path], columns: List[str]) -> np.ndarray:
    """Parse the named columns of a comma-separated file into a float matrix.

    Every selected cell must be a finite decimal number. Row numbers in errors
    count data rows from 1, header excluded.

    Raises:
        DatasetMissingError: The file does not exist.
        SchemaError: A named column is absent from the header.
        ParseError: A cell is not a decimal number.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetMissingError(f"dataset file not found: {path}")

    try:
        frame = pd.read_csv(path, sep=",", dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise SchemaError(f"{path} has no header row") from e
    frame.columns = [str(c).strip() for c in frame.columns]

    for column in columns:
        if column not in frame.columns:
            raise SchemaError(f"column '{column}' not found in {path.name}", column=column)

    values = np.empty((len(frame), len(columns)))
    first_bad = None
    for j, column in enumerate(columns):
        raw = frame[column].str.strip()
        parsed = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(parsed))
        if bad.size and (first_bad is None or bad[0] < first_bad[0]):
            first_bad = (int(bad[0]), column, raw.iloc[bad[0]])
        values[:, j] = parsed
    if first_bad is not None:
        index, column, cell = first_bad
        raise ParseError(f"row {index + 1} column '{column}': cannot parse '{cell}' as a number", row=index + 1)
    return values


def load_csv(path: Union[str, Path], response_column: str, covariate_columns: List[str]) -> DataBlock:
    """Read the named response and covariate columns of a comma-separated file.

    Args:
        path: CSV file with a header row
        response_column: Name of the response column
        covariate_columns: Names of the covariate columns, in model order

    Returns:
        DataBlock with rows in file order

    Raises:
        DatasetMissingError: The file does not exist.
        SchemaError: A named column is absent from the header.
        ParseError: A cell is not a decimal number.
    """
    values = read_columns(path, list(covariate_columns) + [response_column])
    logger.info(f"Loaded {values.shape[0]} rows x {len(covariate_columns)} covariates from {Path(path).name}")
    return DataBlock(values[:, :-1], values[:, -1], list(covariate_columns), response_column)
