"""
SK Thermography - Signal Model Unit Tests

Tests for the signal service:
- GridImage validation
- Cell means (exact piecewise-constant integration)
- Output grid and pixel index mapping

Run with: pytest backend/app/tests/test_signal.py -v
"""

import numpy as np
import pytest


# ===========================================
# Test Fixtures
# ===========================================

@pytest.fixture
def random_image():
    """Seeded random 5x5 image."""
    from app.services.signal_service import GridImage

    return GridImage(np.random.default_rng(11).uniform(15.0, 25.0, size=(5, 5)))


def riemann_means(values: np.ndarray, w: float, k_rows: int, k_cols: int, subsamples: int = 100) -> np.ndarray:
    """Brute-force cell means from midpoint subsamples (replicated border)."""
    n, m = values.shape
    offsets = (np.arange(subsamples) + 0.5) / subsamples
    out = np.empty((k_rows, k_cols))
    for k1 in range(k_rows):
        rows = np.clip(np.floor((k1 + offsets) / w).astype(int), 0, n - 1)
        for k2 in range(k_cols):
            cols = np.clip(np.floor((k2 + offsets) / w).astype(int), 0, m - 1)
            out[k1, k2] = values[np.ix_(rows, cols)].mean()
    return out


# ===========================================
# GridImage Tests
# ===========================================

class TestGridImage:
    """Tests for GridImage validation."""

    def test_basic_properties(self):
        """Shape, extremes and defaults are exposed."""
        from app.services.signal_service import GridImage, Unit

        img = GridImage([[1.0, 2.0, 3.0], [4.0, 5.0, 6.5]])
        assert img.shape == (2, 3)
        assert img.max_value == 6.5
        assert img.min_value == 1.0
        assert img.unit is Unit.CELSIUS
        assert img.resolution == 1e-2

    def test_values_are_read_only_copy(self):
        """The stored matrix is a frozen copy of the input."""
        from app.services.signal_service import GridImage

        source = np.ones((2, 2))
        img = GridImage(source)
        source[0, 0] = 9.0
        assert img.values[0, 0] == 1.0
        with pytest.raises(ValueError):
            img.values[0, 0] = 3.0

    def test_non_finite_value_names_pixel(self):
        """A NaN is reported with its 1-based pixel."""
        from app.errors import InvalidParameterError
        from app.services.signal_service import GridImage

        values = np.zeros((3, 3))
        values[1, 0] = np.nan
        with pytest.raises(InvalidParameterError, match=r"\(2, 1\)"):
            GridImage(values)

    @pytest.mark.parametrize("values", [[1.0, 2.0], np.zeros((0, 3)), np.zeros((2, 2, 2))])
    def test_bad_shapes(self, values):
        """Only non-empty 2-D matrices are accepted."""
        from app.errors import InvalidParameterError
        from app.services.signal_service import GridImage

        with pytest.raises(InvalidParameterError):
            GridImage(values)

    @pytest.mark.parametrize("resolution", [0.0, -1.0, float("inf")])
    def test_bad_resolution(self, resolution):
        """P must be finite and positive."""
        from app.errors import InvalidParameterError
        from app.services.signal_service import GridImage

        with pytest.raises(InvalidParameterError):
            GridImage([[1.0]], resolution=resolution)


# ===========================================
# Cell Mean Tests
# ===========================================

class TestCellMeans:
    """Tests for the cell-mean table."""

    @pytest.mark.parametrize("w", [1.0, 2.0, 2.5, 7.0])
    def test_constant_image(self, w):
        """Every mean of a constant image is the constant."""
        from app.services.signal_service import GridImage, cell_means

        table = cell_means(GridImage(np.full((4, 3), 7.3)), w, margin=3)
        assert np.allclose(table.means, 7.3, atol=1e-12)

    def test_unit_cells_are_pixels(self):
        """With w = 1 the cells coincide with the pixels."""
        from app.services.signal_service import GridImage, cell_means

        table = cell_means(GridImage([[0.0, 1.0], [2.0, 3.0]]), 1.0)
        assert np.array_equal(table.means, [[0.0, 1.0], [2.0, 3.0]])

    def test_half_pixel_cells(self):
        """A 1x2 image at w = 2 gives four half-pixel cells 0, 0, 1, 1 per row."""
        from app.services.signal_service import GridImage, cell_means

        table = cell_means(GridImage([[0.0, 1.0]]), 2.0)
        assert table.means.shape == (2, 4)
        assert np.array_equal(table.means[0], [0.0, 0.0, 1.0, 1.0])
        assert table.mean(1, 2) == 1.0

    def test_block_is_indexed_by_cell(self):
        """block() addresses cells by k, margins included, and refuses ranges outside the table."""
        from app.errors import InvalidParameterError
        from app.services.signal_service import GridImage, cell_means

        table = cell_means(GridImage([[1.0, 2.0], [3.0, 4.0]]), 1.0, margin=2)
        assert table.k_start == (-2, -2)
        assert np.array_equal(table.block((0, 2), (0, 2)), [[1.0, 2.0], [3.0, 4.0]])
        assert table.block((-2, -1), (3, 4)).tolist() == [[2.0]]
        with pytest.raises(InvalidParameterError):
            table.block((-3, 0), (0, 1))

    @pytest.mark.parametrize("w", [1.0, 2.0, 3.5])
    def test_matches_riemann_oracle(self, random_image, w):
        """Exact integration agrees with 10^4 midpoint subsamples per cell."""
        from app.services.signal_service import cell_means

        table = cell_means(random_image, w)
        k_rows, k_cols = table.means.shape
        oracle = riemann_means(random_image.values, w, k_rows, k_cols)
        assert np.max(np.abs(table.means - oracle)) <= 1e-6

    def test_integer_fast_path_matches_overlaps(self, random_image):
        """The Kronecker path equals the interval-overlap computation."""
        from app.services.signal_service import BoundaryPolicy, cell_means_for_range, overlap_matrix

        rows, cols = (-4, 19), (-2, 17)
        fast = cell_means_for_range(random_image, 3.0, rows, cols).means
        e_rows = overlap_matrix(5, 3.0, rows[0], rows[1], BoundaryPolicy.REPLICATE)
        e_cols = overlap_matrix(5, 3.0, cols[0], cols[1], BoundaryPolicy.REPLICATE)
        assert np.allclose(fast, e_rows @ random_image.values @ e_cols.T, atol=1e-12)

    @pytest.mark.parametrize("w", [1.0, 2.0, 4.0])
    def test_conservation(self, random_image, w):
        """Interior cell means average to the image mean."""
        from app.services.signal_service import cell_means

        table = cell_means(random_image, w)
        assert table.means.mean() == pytest.approx(random_image.values.mean(), abs=1e-10)

    def test_zero_boundary_outside_domain(self):
        """Under the zero policy cells outside the image average to zero."""
        from app.services.signal_service import GridImage, cell_means

        table = cell_means(GridImage(np.full((2, 2), 5.0)), 2.0, boundary="zero", margin=2)
        assert table.k_start == (-2, -2)
        assert np.all(table.means[:2, :] == 0.0)
        assert np.all(table.means[2:6, 2:6] == 5.0)

    def test_replicate_boundary_outside_domain(self):
        """Under replication cells outside take the nearest pixel."""
        from app.services.signal_service import GridImage, cell_means

        table = cell_means(GridImage([[1.0, 2.0], [3.0, 4.0]]), 1.0, margin=2)
        assert table.mean(-2, -2) == 1.0
        assert table.mean(3, 3) == 4.0
        assert table.mean(-1, 3) == 2.0

    def test_one_dimensional_means(self):
        """1-D cell means follow the same overlap rule."""
        from app.services.signal_service import cell_means_1d

        means = cell_means_1d(np.array([0.0, 2.0]), 1.5, 0, 3)
        # cells [0, 2/3], [2/3, 4/3], [4/3, 2]
        assert np.allclose(means, [0.0, 1.0, 2.0], atol=1e-12)

    def test_invalid_w(self, random_image):
        from app.errors import InvalidParameterError
        from app.services.signal_service import cell_means

        with pytest.raises(InvalidParameterError):
            cell_means(random_image, 0.0)

    def test_unknown_boundary(self, random_image):
        from app.errors import InvalidParameterError
        from app.services.signal_service import cell_means

        with pytest.raises(InvalidParameterError):
            cell_means(random_image, 1.0, boundary="mirror")


# ===========================================
# Output Grid Tests
# ===========================================

class TestOutputGrid:
    """Tests for the pixel-center output grid."""

    def test_unit_scale_points(self):
        """R = 1 places points at the pixel centers."""
        from app.services.signal_service import output_grid

        points = output_grid(2, 2, 1.0).points()
        assert points.tolist() == [[0.5, 0.5], [0.5, 1.5], [1.5, 0.5], [1.5, 1.5]]

    def test_doubled_single_pixel(self):
        """One pixel at R = 2 gives four quarter-offset points."""
        from app.services.signal_service import output_grid

        points = output_grid(1, 1, 2.0).points()
        assert points.tolist() == [[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]]

    def test_thermogram_size(self):
        """320x240 at R = 2 gives 640x480 points."""
        from app.services.signal_service import output_grid

        grid = output_grid(320, 240, 2.0)
        assert grid.shape == (640, 480)
        assert grid.points().shape == (640 * 480, 2)

    def test_half_rounds_up(self):
        """round(n R) rounds halves up."""
        from app.services.signal_service import output_size

        assert output_size(3, 1.5) == 5

    @pytest.mark.parametrize("R", [0.5, 0.0, float("nan")])
    def test_invalid_scale(self, R):
        from app.errors import InvalidParameterError
        from app.services.signal_service import output_grid

        with pytest.raises(InvalidParameterError):
            output_grid(4, 4, R)

    def test_pixel_mapping_round_trip(self):
        """Input -> output -> input recovers the pixel for R = 2."""
        from app.services.signal_service import input_pixel_to_output, output_pixel_to_input

        for i in range(1, 11):
            out = input_pixel_to_output(i, 2.0, 20)
            assert 1 <= out <= 20
            assert output_pixel_to_input(out, 2.0, 10) == i
