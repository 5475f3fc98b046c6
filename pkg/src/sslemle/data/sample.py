"""Matched/unmatched sample containers, subsampling protocol and standardization."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..errors import DegenerateColumnError, ShapeError, SizingError


logger = logging.getLogger(__name__)


def _as_matrix(values, name: str, p: Optional[int] = None) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.ndim == 1 and p is not None and array.size == 0:
        array = array.reshape(0, p)
    if array.ndim == 1:
        array = array[:, None]
    if array.ndim != 2:
        raise ShapeError(f"{name} must be a matrix, got shape {array.shape}")
    return array


def _as_vector(values, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float).reshape(-1) if np.ndim(values) <= 1 else None
    if array is None:
        raise ShapeError(f"{name} must be a vector, got shape {np.shape(values)}")
    return array


@dataclass(frozen=True, eq=False)
class DataBlock:
    """Covariate matrix and response vector read from a file, rows in file order."""

    x: np.ndarray
    y: np.ndarray
    covariate_columns: List[str] = field(default_factory=list)
    response_column: str = ""

    def __post_init__(self):
        x = _as_matrix(self.x, "x", len(self.covariate_columns) or None)
        y = _as_vector(self.y, "y")
        if x.shape[0] != y.shape[0]:
            raise ShapeError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def rows(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def take(self, indices: np.ndarray) -> "DataBlock":
        return DataBlock(self.x[indices], self.y[indices], list(self.covariate_columns), self.response_column)


@dataclass(frozen=True, eq=False)
class SemiSupervisedSample:
    """A matched sample ``(X_k, Y_k)`` plus unlinked covariates ``X~_i`` and responses ``Y~_j``."""

    matched_x: np.ndarray
    matched_y: np.ndarray
    unmatched_x: np.ndarray
    unmatched_y: np.ndarray

    def __post_init__(self):
        matched_x = _as_matrix(self.matched_x, "matched_x")
        p = matched_x.shape[1]
        unmatched_x = _as_matrix(self.unmatched_x, "unmatched_x", p)
        matched_y = _as_vector(self.matched_y, "matched_y")
        unmatched_y = _as_vector(self.unmatched_y, "unmatched_y")
        if matched_x.shape[0] != matched_y.shape[0]:
            raise ShapeError(
                f"matched block has {matched_x.shape[0]} covariate rows and {matched_y.shape[0]} responses"
            )
        if unmatched_x.shape[1] != p:
            raise ShapeError(f"unmatched covariates have {unmatched_x.shape[1]} columns, expected {p}")
        object.__setattr__(self, "matched_x", matched_x)
        object.__setattr__(self, "matched_y", matched_y)
        object.__setattr__(self, "unmatched_x", unmatched_x)
        object.__setattr__(self, "unmatched_y", unmatched_y)

    @classmethod
    def matched_only(cls, x, y) -> "SemiSupervisedSample":
        x = _as_matrix(x, "matched_x")
        return cls(x, y, np.empty((0, x.shape[1])), np.empty(0))

    @property
    def p(self) -> int:
        return self.matched_x.shape[1]

    @property
    def m(self) -> int:
        return self.matched_y.shape[0]

    @property
    def n_x(self) -> int:
        return self.unmatched_x.shape[0]

    @property
    def n_y(self) -> int:
        return self.unmatched_y.shape[0]

    @property
    def n(self) -> int:
        return self.n_y

    def lambda_hat(self) -> Optional[float]:
        """``m / n``; None when there are no unmatched responses."""
        if self.n_y == 0:
            return None
        return self.m / self.n_y

    def with_intercept(self) -> "SemiSupervisedSample":
        """Copy with a leading column of ones on both covariate blocks."""
        return SemiSupervisedSample(
            np.column_stack([np.ones(self.m), self.matched_x]),
            self.matched_y,
            np.column_stack([np.ones(self.n_x), self.unmatched_x]),
            self.unmatched_y,
        )

    def shifted(self, offset: float) -> "SemiSupervisedSample":
        """Copy with every response shifted by ``offset``."""
        return SemiSupervisedSample(self.matched_x, self.matched_y + offset, self.unmatched_x, self.unmatched_y + offset)

    def permuted_unmatched(self, rng: np.random.Generator) -> "SemiSupervisedSample":
        """Copy with the unmatched covariate rows and responses shuffled independently."""
        return SemiSupervisedSample(
            self.matched_x,
            self.matched_y,
            self.unmatched_x[rng.permutation(self.n_x)],
            self.unmatched_y[rng.permutation(self.n_y)],
        )


@dataclass(frozen=True)
class SplitSpec:
    """Train/test split and matched/unmatched sizes of the data-application protocol."""

    train_fraction: float
    matched_count: int
    unmatched_count: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction <= 1.0:
            raise SizingError(f"train_fraction must lie in (0, 1], got {self.train_fraction}")
        if self.matched_count < 1 or self.unmatched_count < 0:
            raise SizingError(
                f"need matched_count >= 1 and unmatched_count >= 0, got {self.matched_count}, {self.unmatched_count}"
            )

    def train_size(self, rows: int) -> int:
        return int(round(self.train_fraction * rows))


def subsample_protocol(
    full: DataBlock, spec: SplitSpec, rng: Optional[np.random.Generator] = None
) -> Tuple[SemiSupervisedSample, DataBlock]:
    """Split ``full`` into train/test, then draw matched and de-linked unmatched rows from train.

    The unmatched covariates and responses come from the same ``n`` training rows
    but are returned as separate blocks with the responses shuffled, so no
    pairing survives.

    Args:
        full: Complete dataset
        spec: Split fractions and sizes
        rng: Random stream; defaults to one seeded with ``spec.seed``

    Returns:
        Tuple of (semi-supervised training sample, test block)
    """
    samples, test = nested_subsamples(full, spec, [spec.unmatched_count], rng)
    return samples[0], test


def nested_subsamples(
    full: DataBlock,
    spec: SplitSpec,
    unmatched_counts: List[int],
    rng: Optional[np.random.Generator] = None,
) -> Tuple[List[SemiSupervisedSample], DataBlock]:
    """One train/test split and matched draw shared by several unmatched sizes.

    The unmatched rows for size ``n`` are the first ``n`` of a single draw
    without replacement from the training rows left after the matched draw, so
    the unmatched sets are nested in ``n``. ``spec.unmatched_count`` is ignored
    in favour of ``unmatched_counts``.
    """
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    train_size = spec.train_size(full.rows)
    largest = max(unmatched_counts) if unmatched_counts else 0
    needed = spec.matched_count + largest
    if needed > train_size:
        raise SizingError(
            f"m + n = {needed} exceeds the training set size {train_size} of {full.rows} rows"
        )
    order = rng.permutation(full.rows)
    train_idx, test_idx = order[:train_size], order[train_size:]
    picked = train_idx[rng.permutation(train_size)[:needed]]
    matched_idx = picked[: spec.matched_count]
    pool = picked[spec.matched_count:]

    samples = []
    for n in unmatched_counts:
        unmatched_idx = pool[:n]
        delinked = unmatched_idx[rng.permutation(n)]
        samples.append(
            SemiSupervisedSample(
                full.x[matched_idx],
                full.y[matched_idx],
                full.x[unmatched_idx],
                full.y[delinked],
            )
        )
    logger.debug(
        f"Split {full.rows} rows into train {train_size} / test {full.rows - train_size}, "
        f"m={spec.matched_count}, n={list(unmatched_counts)}"
    )
    return samples, full.take(test_idx)


@dataclass(frozen=True, eq=False)
class Standardization:
    """Affine map ``x_std = (x - mean) / scale`` applied column-wise to the covariates."""

    means: np.ndarray
    scales: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.means) / self.scales

    def invert(self, x_std: np.ndarray) -> np.ndarray:
        return np.asarray(x_std, dtype=float) * self.scales + self.means

    def to_original(self, beta_std: np.ndarray, intercept_std: float = 0.0) -> Tuple[np.ndarray, float]:
        """Back-transform coefficients fitted on standardized covariates.

        ``b0 + b' (x - mean) / scale = (b0 - b' mean / scale) + (b / scale)' x``
        """
        beta = np.asarray(beta_std, dtype=float) / self.scales
        return beta, float(intercept_std - beta @ self.means)


def standardize(sample: SemiSupervisedSample) -> Tuple[SemiSupervisedSample, Standardization]:
    """Center and scale the covariates of both blocks with statistics pooled over all covariate rows.

    Raises:
        DegenerateColumnError: A covariate column has zero sample standard deviation.
    """
    pooled = np.vstack([sample.matched_x, sample.unmatched_x])
    means = pooled.mean(axis=0)
    scales = pooled.std(axis=0, ddof=1) if pooled.shape[0] > 1 else np.zeros(sample.p)
    degenerate = np.flatnonzero(~(scales > 0.0))
    if degenerate.size:
        raise DegenerateColumnError(f"covariate column(s) {degenerate.tolist()} have zero variance")
    transform = Standardization(means, scales)
    standardized = SemiSupervisedSample(
        transform.apply(sample.matched_x),
        sample.matched_y,
        transform.apply(sample.unmatched_x),
        sample.unmatched_y,
    )
    return standardized, transform
