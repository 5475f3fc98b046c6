"""Tests for sample containers, CSV ingestion and the subsampling protocol."""

import numpy as np
import pytest

from sslemle.data import (
    DataBlock,
    SemiSupervisedSample,
    SplitSpec,
    load_csv,
    nested_subsamples,
    read_columns,
    standardize,
    subsample_protocol,
)
from sslemle.errors import (
    DatasetMissingError,
    DegenerateColumnError,
    ParseError,
    SchemaError,
    ShapeError,
    SizingError,
)


def _block(rows: int, p: int = 2, seed: int = 0) -> DataBlock:
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(rows, p))
    return DataBlock(x, x.sum(axis=1) + np.arange(rows) * 1e-3, [f"x{k}" for k in range(p)], "y")


class TestSemiSupervisedSample:
    """Tests for the sample container."""

    def test_dimensions(self, gaussian_sample):
        """Sizes and lambda_hat follow the blocks."""
        assert gaussian_sample.p == 3
        assert gaussian_sample.m == 60
        assert gaussian_sample.n == 300
        assert gaussian_sample.lambda_hat() == pytest.approx(0.2)

    def test_matched_only_has_no_lambda(self):
        """Without unmatched responses lambda_hat is undefined."""
        sample = SemiSupervisedSample.matched_only(np.ones((4, 2)), np.zeros(4))
        assert sample.n == 0
        assert sample.lambda_hat() is None

    def test_vector_covariates_become_columns(self):
        """A 1-D covariate array is one column."""
        sample = SemiSupervisedSample([1.0, 2.0], [0.0, 1.0], [3.0], [2.0])
        assert sample.matched_x.shape == (2, 1)
        assert sample.unmatched_x.shape == (1, 1)

    def test_mismatched_blocks(self):
        """Row and column mismatches raise ShapeError."""
        with pytest.raises(ShapeError):
            SemiSupervisedSample(np.ones((3, 2)), np.ones(2), np.ones((1, 2)), np.ones(1))
        with pytest.raises(ShapeError):
            SemiSupervisedSample(np.ones((3, 2)), np.ones(3), np.ones((1, 3)), np.ones(1))

    def test_with_intercept(self, gaussian_sample):
        """Intercept column is prepended on both covariate blocks."""
        augmented = gaussian_sample.with_intercept()
        assert augmented.p == 4
        np.testing.assert_array_equal(augmented.matched_x[:, 0], 1.0)
        np.testing.assert_array_equal(augmented.unmatched_x[:, 0], 1.0)


class TestCsv:
    """Tests for CSV ingestion."""

    def test_load_columns_in_order(self, temp_dir):
        """Covariates come back in the requested order."""
        path = temp_dir / "data.csv"
        path.write_text("a,b,y\n1,2,3\n4,5,6\n")
        block = load_csv(path, "y", ["b", "a"])
        np.testing.assert_array_equal(block.x, [[2.0, 1.0], [5.0, 4.0]])
        np.testing.assert_array_equal(block.y, [3.0, 6.0])
        assert block.p == 2

    def test_header_only_file(self, temp_dir):
        """A header without rows is a valid empty block."""
        path = temp_dir / "empty.csv"
        path.write_text("AT,V,AP,RH,PE\n")
        block = load_csv(path, "PE", ["AT", "V", "AP", "RH"])
        assert block.rows == 0
        assert block.x.shape == (0, 4)

    def test_missing_column(self, temp_dir):
        """An absent column is named in the schema error."""
        path = temp_dir / "data.csv"
        path.write_text("a,y\n1,2\n")
        with pytest.raises(SchemaError) as excinfo:
            load_csv(path, "y", ["a", "b"])
        assert excinfo.value.column == "b"

    def test_na_cell_cites_row(self, temp_dir):
        """A non-numeric cell reports its 1-based data row."""
        path = temp_dir / "data.csv"
        rows = [f"{k},{k + 1}" for k in range(1, 11)]
        rows[6] = "NA,8"
        path.write_text("a,y\n" + "\n".join(rows) + "\n")
        with pytest.raises(ParseError) as excinfo:
            load_csv(path, "y", ["a"])
        assert excinfo.value.row == 7
        assert "row 7" in excinfo.value.message

    def test_missing_file(self, temp_dir):
        """A missing path raises DatasetMissingError."""
        with pytest.raises(DatasetMissingError):
            load_csv(temp_dir / "nope.csv", "y", ["a"])

    def test_read_columns_without_response(self, temp_dir):
        """Covariate-only files can be read directly."""
        path = temp_dir / "x.csv"
        path.write_text("a, b\n1.5, 2\n-3, 4e-1\n")
        np.testing.assert_allclose(read_columns(path, ["a", "b"]), [[1.5, 2.0], [-3.0, 0.4]])


class TestSubsampling:
    """Tests for the train/test and matched/unmatched protocol."""

    def test_power_plant_sizes(self):
        """9568 rows with a 0.75 split give 7176/2392 and the requested m, n."""
        full = _block(9568)
        sample, test = subsample_protocol(full, SplitSpec(0.75, 10, 1600, seed=3))
        assert test.rows == 2392
        assert sample.m == 10
        assert sample.n_x == sample.n_y == 1600

    def test_matched_only_protocol(self):
        """m = 100 and n = 0 on 100 rows is valid."""
        sample, test = subsample_protocol(_block(100), SplitSpec(1.0, 100, 0))
        assert sample.m == 100
        assert sample.n == 0
        assert test.rows == 0

    def test_deterministic(self):
        """The same seed reproduces the same draw."""
        full = _block(500)
        a, ta = subsample_protocol(full, SplitSpec(0.8, 20, 100, seed=11))
        b, tb = subsample_protocol(full, SplitSpec(0.8, 20, 100, seed=11))
        np.testing.assert_array_equal(a.matched_x, b.matched_x)
        np.testing.assert_array_equal(a.unmatched_y, b.unmatched_y)
        np.testing.assert_array_equal(ta.y, tb.y)

    def test_disjoint_rows(self):
        """Matched, unmatched and test rows never overlap."""
        full = _block(300)
        sample, test = subsample_protocol(full, SplitSpec(0.5, 30, 100, seed=1))
        # responses are unique per row in _block
        matched = set(np.round(sample.matched_y, 9))
        unmatched = set(np.round(sample.unmatched_y, 9))
        held_out = set(np.round(test.y, 9))
        assert not matched & unmatched
        assert not (matched | unmatched) & held_out

    def test_unmatched_blocks_share_rows(self):
        """De-linked responses are a permutation of the unmatched rows' responses."""
        full = _block(200)
        sample, _ = subsample_protocol(full, SplitSpec(1.0, 10, 50, seed=2))
        np.testing.assert_allclose(np.sort(sample.unmatched_y), np.sort(sample.unmatched_x.sum(axis=1) + 0.0), atol=0.2)

    def test_oversized_request(self):
        """m + n above the training size raises SizingError."""
        with pytest.raises(SizingError):
            subsample_protocol(_block(100), SplitSpec(0.5, 10, 45))

    def test_nested_sets(self):
        """Unmatched covariate sets grow by inclusion."""
        samples, _ = nested_subsamples(_block(400), SplitSpec(0.75, 10, 0, seed=4), [20, 80])
        small = {tuple(row) for row in samples[0].unmatched_x}
        large = {tuple(row) for row in samples[1].unmatched_x}
        assert small <= large
        np.testing.assert_array_equal(samples[0].matched_x, samples[1].matched_x)

    @pytest.mark.parametrize("fraction", [0.0, 1.5])
    def test_invalid_fraction(self, fraction):
        """train_fraction outside (0, 1] is rejected."""
        with pytest.raises(SizingError):
            SplitSpec(fraction, 10, 10)


class TestStandardize:
    """Tests for covariate standardization."""

    def test_constant_column(self):
        """A zero-variance column raises DegenerateColumnError."""
        x = np.column_stack([np.ones(6), np.arange(6.0)])
        sample = SemiSupervisedSample(x[:3], np.zeros(3), x[3:], np.zeros(3))
        with pytest.raises(DegenerateColumnError):
            standardize(sample)

    def test_pooled_moments(self, gaussian_sample):
        """Pooled covariates have zero mean and unit sd after the transform."""
        standardized, _ = standardize(gaussian_sample)
        pooled = np.vstack([standardized.matched_x, standardized.unmatched_x])
        np.testing.assert_allclose(pooled.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(pooled.std(axis=0, ddof=1), 1.0, atol=1e-12)
        np.testing.assert_array_equal(standardized.matched_y, gaussian_sample.matched_y)

    def test_idempotent_on_standardized_data(self, gaussian_sample):
        """Standardizing twice leaves means at 0 and scales at 1."""
        once, _ = standardize(gaussian_sample)
        _, transform = standardize(once)
        np.testing.assert_allclose(transform.means, 0.0, atol=1e-12)
        np.testing.assert_allclose(transform.scales, 1.0, atol=1e-12)

    def test_round_trip(self, gaussian_sample):
        """invert(apply(x)) is the identity."""
        _, transform = standardize(gaussian_sample)
        x = gaussian_sample.unmatched_x
        np.testing.assert_allclose(transform.invert(transform.apply(x)), x, atol=1e-12)

    def test_coefficients_back_to_original_units(self, gaussian_sample):
        """A linear predictor is unchanged by the coefficient back-transform."""
        _, transform = standardize(gaussian_sample)
        beta_std, intercept_std = np.array([0.3, -1.2, 2.0]), 0.7
        beta, intercept = transform.to_original(beta_std, intercept_std)
        x = gaussian_sample.matched_x
        np.testing.assert_allclose(transform.apply(x) @ beta_std + intercept_std, x @ beta + intercept, atol=1e-12)
