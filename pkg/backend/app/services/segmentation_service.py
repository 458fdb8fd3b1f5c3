"""
Thermal Bridge Segmentation Service

Bimodal-histogram threshold procedure for thermograms:
1. Histogram of the (enhanced) image, equal-width bins over [min, max]
2. Moving-average smoothing of a copy of the counts
3. The two relative maxima with the largest smoothed counts (T_P1 < T_P2)
4. Valley T_m = minimum strictly between them, ties resolved toward the
   taller peak, then refined on the raw counts within +/- 2 bins
5. A_B = {pixels <= T_m} (cold bridges) or {pixels >= T_m} (warm bridges)
6. Contours: A_B pixels with a 4-neighbor in A_E or on the image border

Author: SK Thermography Team
"""

import math
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import binary_erosion, generate_binary_structure, uniform_filter1d
from skimage.filters import threshold_otsu

from ..config import (
    DEFAULT_BINS,
    DEFAULT_BRIDGE_IS_COLD,
    DEFAULT_SMOOTH_WINDOW,
    MIN_BINS,
    REBIN_SEQUENCE,
    RECOMMENDED_MIN_BINS,
    VALLEY_DEPTH_LIMIT,
    VALLEY_REFINE_BINS,
)
from ..errors import DegenerateHistogramError, InvalidParameterError, UnimodalDataError
from ..logging_config import get_logger
from .signal_service import GridImage

logger = get_logger(__name__)

Pixel = Tuple[int, int]


# ===========================================
# Types
# ===========================================

@dataclass(frozen=True, eq=False)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    smoothed: np.ndarray
    smoothing_window: int

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def bins(self) -> int:
        return int(self.counts.size)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_counts(cls, counts: Sequence[float], first_center: float, width: float,
                    smoothing_window: int = 1) -> "Histogram":
        """Histogram from explicit counts on a regular grid of bin centers."""
        raw = np.asarray(counts, dtype=np.float64)
        if raw.size < MIN_BINS or not width > 0:
            raise InvalidParameterError("need at least two bins and a positive width")
        edges = first_center - width / 2.0 + width * np.arange(raw.size + 1)
        return cls(bin_edges=edges, counts=raw, smoothed=_smooth(raw, smoothing_window),
                   smoothing_window=smoothing_window)


@dataclass(frozen=True)
class ThresholdReport:
    T_P1: float
    T_P2: float
    P1: float
    P2: float
    T_m: float
    tie_broken: bool
    valley_candidates: Tuple[float, ...]
    refined_candidates: Tuple[float, ...] = ()
    smoothed_valley: float = math.nan
    valley_depth: float = math.nan
    otsu_threshold: float = math.nan
    bins: int = 0
    bin_width: float = 0.0
    rebin_attempts: Tuple[int, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "T_P1": self.T_P1,
            "T_P2": self.T_P2,
            "P1": self.P1,
            "P2": self.P2,
            "T_m": self.T_m,
            "tie_broken": self.tie_broken,
            "valley_candidates": list(self.valley_candidates),
            "refined_candidates": list(self.refined_candidates),
            "smoothed_valley": self.smoothed_valley,
            "valley_depth": self.valley_depth,
            "otsu_threshold": self.otsu_threshold,
            "bins": self.bins,
            "bin_width": self.bin_width,
            "rebin_attempts": list(self.rebin_attempts),
        }


@dataclass(frozen=True, eq=False)
class SegmentationMask:
    """Binary matrix, True = thermal-bridge area A_B."""

    mask: np.ndarray
    threshold: float = math.nan
    bridge_is_cold: bool = True

    def __post_init__(self):
        arr = np.array(self.mask, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise InvalidParameterError("mask must be 2-D")
        arr.flags.writeable = False
        object.__setattr__(self, "mask", arr)

    @property
    def shape(self) -> Tuple[int, int]:
        return int(self.mask.shape[0]), int(self.mask.shape[1])

    @property
    def bridge_area(self) -> int:
        return int(self.mask.sum())

    @property
    def external_area(self) -> int:
        return int(self.mask.size - self.mask.sum())

    @property
    def region_areas(self) -> Dict[str, int]:
        return {"A_B": self.bridge_area, "A_E": self.external_area}


# ===========================================
# Histogram
# ===========================================

def _smooth(counts: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return counts.astype(np.float64).copy()
    return uniform_filter1d(counts.astype(np.float64), size=window, mode="nearest")


def _values_of(data: Union[GridImage, np.ndarray, Sequence[float]]) -> np.ndarray:
    if isinstance(data, GridImage):
        return data.values.ravel()
    return np.asarray(data, dtype=np.float64).ravel()


def build_histogram(data: Union[GridImage, np.ndarray, Sequence[float]], bins: int = DEFAULT_BINS,
                    smooth: int = DEFAULT_SMOOTH_WINDOW) -> Histogram:
    """
    Equal-width histogram over [min, max] of the data.

    Raw counts are preserved; ``smoothed`` is a centered moving average of
    width ``smooth`` used only for peak detection.
    """
    if isinstance(bins, bool) or int(bins) != bins or bins < MIN_BINS:
        raise InvalidParameterError(f"bins must be an integer >= {MIN_BINS}, got {bins!r}")
    if isinstance(smooth, bool) or int(smooth) != smooth or smooth < 1 or smooth % 2 == 0:
        raise InvalidParameterError(f"smoothing window must be an odd integer >= 1, got {smooth!r}")
    bins, smooth = int(bins), int(smooth)
    if bins < RECOMMENDED_MIN_BINS:
        logger.warning(f"Histogram with only {bins} bins; peak detection may be unreliable")
    values = _values_of(data)
    if values.size == 0:
        raise InvalidParameterError("cannot build a histogram of no data")
    low, high = float(values.min()), float(values.max())
    if not high > low:
        raise DegenerateHistogramError(f"constant data (all values {low:g}); histogram is degenerate",
                                       {"value": low, "samples": int(values.size)})
    counts, edges = np.histogram(values, bins=bins, range=(low, high))
    return Histogram(bin_edges=edges, counts=counts, smoothed=_smooth(counts, smooth),
                     smoothing_window=smooth)


# ===========================================
# Threshold Detection
# ===========================================

def relative_maxima(values: np.ndarray) -> List[int]:
    """
    Interior bins strictly greater than both neighbors. A plateau of equal
    values bounded by strictly lower bins counts once, at its center bin.
    """
    v = np.asarray(values, dtype=np.float64)
    peaks: List[int] = []
    i = 1
    while i < v.size - 1:
        j = i
        while j + 1 < v.size and v[j + 1] == v[i]:
            j += 1
        if j < v.size - 1 and v[i - 1] < v[i] and v[j + 1] < v[i]:
            peaks.append((i + j) // 2)
        i = j + 1
    return peaks


def _closest_to(candidates: Sequence[int], target: int) -> int:
    return min(candidates, key=lambda idx: abs(idx - target))


def find_threshold(h: Histogram) -> ThresholdReport:
    """
    Valley threshold between the two biggest relative maxima.

    Raises:
        UnimodalDataError: fewer than two relative maxima in the smoothed counts
    """
    smoothed = h.smoothed
    centers = h.centers
    peaks = relative_maxima(smoothed)
    if len(peaks) < 2:
        raise UnimodalDataError(
            f"histogram has {len(peaks)} relative maxima, two are needed",
            {"maxima": len(peaks), "bins": h.bins, "smoothing_window": h.smoothing_window},
        )
    top = sorted(peaks, key=lambda idx: (-smoothed[idx], idx))[:2]
    p1, p2 = sorted(top)
    if smoothed[p2] >= smoothed[p1]:
        taller = p2
    else:
        taller = p1
    logger.debug(f"Peaks at {centers[p1]:.4f} ({smoothed[p1]:.1f}) and {centers[p2]:.4f} ({smoothed[p2]:.1f})")

    between = np.arange(p1 + 1, p2)
    lowest = smoothed[between].min()
    tied = [int(i) for i in between if smoothed[i] == lowest]
    valley = _closest_to(tied, taller)

    lo = max(p1 + 1, valley - VALLEY_REFINE_BINS)
    hi = min(p2 - 1, valley + VALLEY_REFINE_BINS)
    window = np.arange(lo, hi + 1)
    raw_lowest = h.counts[window].min()
    raw_tied = [int(i) for i in window if h.counts[i] == raw_lowest]
    refined = _closest_to(raw_tied, taller)

    # empty outer bins make Otsu's class means 0/0
    occupied = np.flatnonzero(h.counts)
    span = slice(int(occupied[0]), int(occupied[-1]) + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        otsu = float(threshold_otsu(hist=(np.asarray(h.counts[span], dtype=np.float64), centers[span])))

    return ThresholdReport(
        T_P1=float(centers[p1]),
        T_P2=float(centers[p2]),
        P1=float(smoothed[p1]),
        P2=float(smoothed[p2]),
        T_m=float(centers[refined]),
        tie_broken=len(tied) > 1 or len(raw_tied) > 1,
        valley_candidates=tuple(float(centers[i]) for i in tied),
        refined_candidates=tuple(float(centers[i]) for i in raw_tied),
        smoothed_valley=float(centers[valley]),
        valley_depth=float(lowest / min(smoothed[p1], smoothed[p2])),
        otsu_threshold=otsu,
        bins=h.bins,
        bin_width=h.bin_width,
    )


def detect_threshold(data: Union[GridImage, np.ndarray], bins: int = DEFAULT_BINS,
                     smooth: int = DEFAULT_SMOOTH_WINDOW,
                     auto_rebin: bool = False) -> Tuple[Histogram, ThresholdReport]:
    """
    build_histogram + find_threshold. With ``auto_rebin`` coarser binnings
    are tried (following REBIN_SEQUENCE) until the valley is significant;
    the deepest valley found is kept otherwise.
    """
    sequence = [bins]
    if auto_rebin:
        sequence += [b for b in REBIN_SEQUENCE if b < bins]
    attempts: List[int] = []
    best: Optional[Tuple[Histogram, ThresholdReport]] = None
    last_error: Optional[UnimodalDataError] = None
    for count in sequence:
        attempts.append(count)
        histogram = build_histogram(data, count, smooth)
        try:
            report = find_threshold(histogram)
        except UnimodalDataError as exc:
            last_error = exc
            logger.debug(f"{count} bins: unimodal, trying coarser binning")
            continue
        if best is None or report.valley_depth < best[1].valley_depth:
            best = (histogram, report)
        if report.valley_depth <= VALLEY_DEPTH_LIMIT:
            break
        logger.debug(f"{count} bins: shallow valley (depth {report.valley_depth:.2f})")
    if best is None:
        raise last_error
    histogram, report = best
    if report.valley_depth > VALLEY_DEPTH_LIMIT:
        logger.warning(f"Valley depth {report.valley_depth:.2f} above {VALLEY_DEPTH_LIMIT}; threshold may be unreliable")
    return histogram, replace(report, rebin_attempts=tuple(attempts))


# ===========================================
# Segmentation and Contours
# ===========================================

def segment(data: Union[GridImage, np.ndarray], T_m: float,
            bridge_is_cold: bool = DEFAULT_BRIDGE_IS_COLD) -> SegmentationMask:
    values = data.values if isinstance(data, GridImage) else np.asarray(data, dtype=np.float64)
    if not (values.min() <= T_m <= values.max()):
        logger.warning(f"T_m={T_m:.4f} outside data range [{values.min():.4f}, {values.max():.4f}]")
    mask = values <= T_m if bridge_is_cold else values >= T_m
    return SegmentationMask(mask=mask, threshold=float(T_m), bridge_is_cold=bridge_is_cold)


def contour_mask(mask: Union[SegmentationMask, np.ndarray]) -> np.ndarray:
    region = mask.mask if isinstance(mask, SegmentationMask) else np.asarray(mask, dtype=bool)
    cross = generate_binary_structure(2, 1)
    interior = binary_erosion(region, structure=cross, border_value=0)
    return region & ~interior


def contours(mask: Union[SegmentationMask, np.ndarray]) -> List[Pixel]:
    """1-based (row, col) of the boundary pixels of A_B, row-major order."""
    return [(int(r) + 1, int(c) + 1) for r, c in np.argwhere(contour_mask(mask))]


def mask_agreement(mask: Union[SegmentationMask, np.ndarray], truth: np.ndarray) -> float:
    """Fraction of pixels on which two masks agree."""
    a = mask.mask if isinstance(mask, SegmentationMask) else np.asarray(mask, dtype=bool)
    b = np.asarray(truth, dtype=bool)
    if a.shape != b.shape:
        raise InvalidParameterError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean(a == b))


# ===========================================
# Two-Gaussian Reference Threshold
# ===========================================

def gaussian_crossing(mu1: float, sigma1: float, mu2: float, sigma2: float,
                      weight1: float = 1.0, weight2: float = 1.0) -> float:
    """
    Point between mu1 and mu2 where the weighted normal densities are equal
    (the misclassification-minimizing threshold for two Gaussian classes).
    """
    if sigma1 <= 0 or sigma2 <= 0 or weight1 <= 0 or weight2 <= 0:
        raise InvalidParameterError("sigmas and weights must be > 0")
    if mu1 == mu2:
        raise InvalidParameterError("the two means must differ")
    a = 1.0 / (2 * sigma2 ** 2) - 1.0 / (2 * sigma1 ** 2)
    b = mu1 / sigma1 ** 2 - mu2 / sigma2 ** 2
    c = mu2 ** 2 / (2 * sigma2 ** 2) - mu1 ** 2 / (2 * sigma1 ** 2) + math.log(weight1 * sigma2 / (weight2 * sigma1))
    if abs(a) < 1e-12:
        return -c / b
    roots = np.roots([a, b, c])
    real = roots[np.abs(roots.imag) < 1e-12].real
    if real.size == 0:
        raise InvalidParameterError("the two densities never cross")
    low, high = min(mu1, mu2), max(mu1, mu2)
    inside = real[(real >= low) & (real <= high)]
    pool = inside if inside.size else real
    return float(pool[np.argmin(np.abs(pool - 0.5 * (mu1 + mu2)))])
