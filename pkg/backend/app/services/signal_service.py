"""
Signal Service

Images and thermograms modeled as step functions: pixel (i, j) (1-based) is
the constant a_ij on (i-1, i] x (j-1, j]. This module computes the exact cell
means w^2 * integral over R_k^w = [k1/w, (k1+1)/w] x [k2/w, (k2+1)/w] that
feed the sampling Kantorovich operator, and the output evaluation grid.

The 2-D means are separable: means = E_rows @ A @ E_cols.T, where
E[k, p] = w * |cell_k intersect pixel_p| along one axis.

Author: SK Thermography Team
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np

from ..config import DEFAULT_MEASUREMENT_RESOLUTION
from ..errors import InvalidParameterError
from ..logging_config import get_logger

logger = get_logger(__name__)


class Unit(str, Enum):
    CELSIUS = "celsius"
    GRAYLEVEL = "graylevel"


class BoundaryPolicy(str, Enum):
    """How cells reaching past the image domain are filled."""

    REPLICATE = "replicate"  # nearest pixel extends to infinity
    ZERO = "zero"            # image is zero outside [0, n] x [0, m]

    @classmethod
    def parse(cls, value: Union[str, "BoundaryPolicy"]) -> "BoundaryPolicy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError as exc:
            raise InvalidParameterError(f"unknown boundary policy {value!r}") from exc


# ===========================================
# Grid Image
# ===========================================

@dataclass(frozen=True, eq=False)
class GridImage:
    """
    Rectangular matrix of finite samples with a unit tag and the
    measurement resolution P of the device that produced it.
    """

    values: np.ndarray
    unit: Unit = Unit.CELSIUS
    resolution: float = DEFAULT_MEASUREMENT_RESOLUTION

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise InvalidParameterError(f"image must be a 2-D matrix, got {arr.ndim} dimension(s)")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidParameterError(f"image must have at least one row and column, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise InvalidParameterError(f"non-finite sample at pixel ({bad[0] + 1}, {bad[1] + 1})")
        if not (math.isfinite(self.resolution) and self.resolution > 0):
            raise InvalidParameterError(f"measurement resolution must be > 0, got {self.resolution!r}")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "unit", Unit(self.unit))
        object.__setattr__(self, "resolution", float(self.resolution))

    @property
    def rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def cols(self) -> int:
        return int(self.values.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows, self.cols

    @property
    def max_value(self) -> float:
        """A = max a_ij."""
        return float(self.values.max())

    @property
    def min_value(self) -> float:
        return float(self.values.min())

    def with_values(self, values: np.ndarray) -> "GridImage":
        return GridImage(values, unit=self.unit, resolution=self.resolution)


@dataclass(frozen=True, eq=False)
class CellMeanTable:
    """
    Means of the image over the cells R_k^w for k in
    [k_start[0], k_start[0] + rows) x [k_start[1], k_start[1] + cols).
    """

    w: float
    means: np.ndarray
    boundary_policy: BoundaryPolicy
    k_start: Tuple[int, int] = (0, 0)

    def __post_init__(self):
        self.means.flags.writeable = False

    @property
    def k_stop(self) -> Tuple[int, int]:
        return self.k_start[0] + self.means.shape[0], self.k_start[1] + self.means.shape[1]

    def mean(self, k1: int, k2: int) -> float:
        return float(self.means[k1 - self.k_start[0], k2 - self.k_start[1]])

    def block(self, rows: Tuple[int, int], cols: Tuple[int, int]) -> np.ndarray:
        """Read-only view of the means for k1 in [rows[0], rows[1]) and k2 in [cols[0], cols[1])."""
        r0, r1 = rows[0] - self.k_start[0], rows[1] - self.k_start[0]
        c0, c1 = cols[0] - self.k_start[1], cols[1] - self.k_start[1]
        if r0 < 0 or c0 < 0 or r1 > self.means.shape[0] or c1 > self.means.shape[1]:
            raise InvalidParameterError(
                f"cell range rows={rows} cols={cols} is outside the table {self.k_start}..{self.k_stop}"
            )
        return self.means[r0:r1, c0:c1]


# ===========================================
# Cell Means
# ===========================================

def overlap_matrix(n: int, w: float, k_start: int, k_stop: int, boundary: BoundaryPolicy) -> np.ndarray:
    """
    E[k - k_start, p] = w * |[k/w, (k+1)/w] intersect pixel p| along one axis.

    Pixel p (0-based) covers (p, p+1]; under REPLICATE the first and last
    pixels extend to -inf and +inf.
    """
    ks = np.arange(k_start, k_stop, dtype=np.float64)
    cell_lo = (ks / w)[:, None]
    cell_hi = ((ks + 1.0) / w)[:, None]
    pix_lo = np.arange(n, dtype=np.float64)
    pix_hi = pix_lo + 1.0
    if boundary is BoundaryPolicy.REPLICATE:
        pix_lo[0] = -np.inf
        pix_hi[-1] = np.inf
    overlap = np.minimum(cell_hi, pix_hi[None, :]) - np.maximum(cell_lo, pix_lo[None, :])
    return np.clip(overlap, 0.0, None) * w


def _kron_means(values: np.ndarray, w: int, rows: Tuple[int, int], cols: Tuple[int, int],
                boundary: BoundaryPolicy) -> np.ndarray:
    """Integer w: each cell lies inside one pixel, so the means are a Kronecker blow-up."""
    n, m = values.shape
    p0, p1 = rows[0] // w, (rows[1] - 1) // w
    q0, q1 = cols[0] // w, (cols[1] - 1) // w
    pad = ((max(0, -p0), max(0, p1 - (n - 1))), (max(0, -q0), max(0, q1 - (m - 1))))
    if boundary is BoundaryPolicy.REPLICATE:
        padded = np.pad(values, pad, mode="edge")
    else:
        padded = np.pad(values, pad, mode="constant", constant_values=0.0)
    r0, c0 = p0 + pad[0][0], q0 + pad[1][0]
    block = padded[r0:r0 + (p1 - p0 + 1), c0:c0 + (q1 - q0 + 1)]
    expanded = np.kron(block, np.ones((w, w)))
    dr, dc = rows[0] - p0 * w, cols[0] - q0 * w
    return expanded[dr:dr + rows[1] - rows[0], dc:dc + cols[1] - cols[0]]


def cell_means_for_range(
    img: GridImage,
    w: float,
    rows: Tuple[int, int],
    cols: Tuple[int, int],
    boundary: Union[str, BoundaryPolicy] = BoundaryPolicy.REPLICATE,
) -> CellMeanTable:
    """Cell means for k1 in [rows[0], rows[1]) and k2 in [cols[0], cols[1])."""
    if not (math.isfinite(w) and w > 0):
        raise InvalidParameterError(f"w must be > 0, got {w!r}")
    if rows[1] <= rows[0] or cols[1] <= cols[0]:
        raise InvalidParameterError(f"empty cell range rows={rows} cols={cols}")
    policy = BoundaryPolicy.parse(boundary)
    if float(w).is_integer():
        means = _kron_means(img.values, int(w), rows, cols, policy)
    else:
        e_rows = overlap_matrix(img.rows, w, rows[0], rows[1], policy)
        e_cols = overlap_matrix(img.cols, w, cols[0], cols[1], policy)
        means = e_rows @ img.values @ e_cols.T
    return CellMeanTable(w=float(w), means=np.ascontiguousarray(means), boundary_policy=policy,
                         k_start=(int(rows[0]), int(cols[0])))


def cell_means(
    img: GridImage,
    w: float,
    boundary: Union[str, BoundaryPolicy] = BoundaryPolicy.REPLICATE,
    margin: int = 0,
) -> CellMeanTable:
    """
    Means over every cell R_k^w intersecting [0, n] x [0, m], optionally
    widened by ``margin`` cells on each side.
    """
    if not (math.isfinite(w) and w > 0):
        raise InvalidParameterError(f"w must be > 0, got {w!r}")
    k_rows = int(math.ceil(img.rows * w))
    k_cols = int(math.ceil(img.cols * w))
    return cell_means_for_range(
        img, w, (-margin, k_rows + margin), (-margin, k_cols + margin), boundary
    )


def cell_means_1d(samples: np.ndarray, w: float, k_start: int, k_stop: int,
                  boundary: Union[str, BoundaryPolicy] = BoundaryPolicy.REPLICATE) -> np.ndarray:
    """Cell means of a 1-D step signal for k in [k_start, k_stop)."""
    values = np.asarray(samples, dtype=np.float64)
    return overlap_matrix(values.size, w, k_start, k_stop, BoundaryPolicy.parse(boundary)) @ values


# ===========================================
# Output Grid
# ===========================================

@dataclass(frozen=True, eq=False)
class OutputGrid:
    """
    Pixel-center evaluation points: output pixel (i, j), 1-based, sits at
    ((i - 0.5) / R, (j - 0.5) / R).
    """

    row_coords: np.ndarray
    col_coords: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return int(self.row_coords.size), int(self.col_coords.size)

    def points(self) -> np.ndarray:
        """All points, row-major, shape (rows * cols, 2)."""
        xx, yy = np.meshgrid(self.row_coords, self.col_coords, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])


def output_size(n: int, R: float) -> int:
    """round(n * R), halves rounded up."""
    return int(math.floor(n * R + 0.5))


def axis_coords(n: int, R: float) -> np.ndarray:
    count = output_size(n, R)
    return (np.arange(1, count + 1, dtype=np.float64) - 0.5) / R


def output_grid(n: int, m: int, R: float) -> OutputGrid:
    if n < 1 or m < 1:
        raise InvalidParameterError(f"grid dimensions must be >= 1, got {n}x{m}")
    if not (math.isfinite(R) and R >= 1):
        raise InvalidParameterError(f"scaling factor R must be >= 1, got {R!r}")
    return OutputGrid(row_coords=axis_coords(n, R), col_coords=axis_coords(m, R))


def input_pixel_to_output(index: int, R: float, size: int) -> int:
    """1-based output pixel whose cell contains the center of input pixel ``index``."""
    out = int(math.floor((index - 0.5) * R)) + 1
    return min(max(out, 1), size)


def output_pixel_to_input(index: int, R: float, n: int) -> int:
    """1-based input pixel containing the center of output pixel ``index``."""
    x = (index - 0.5) / R
    return min(max(int(math.floor(x)) + 1, 1), n)
