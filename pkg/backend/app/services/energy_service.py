"""
Energy Index Service

Incidence factor of a thermal bridge along a pixel line crossing it:

    I_tb = sum_p (T_i - T_p) / (N * (T_i - T_1D))

T_i is the internal air temperature, T_1D the surface temperature of the
undisturbed zone and T_p the temperature of each of the N line pixels.
Values above one indicate a genuine bridge; they are reported, not enforced.

Author: SK Thermography Team
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from skimage.draw import line as raster_line

from ..config import DEFAULT_BINS, IMPROVEMENT_DISCREPANCY_LIMIT
from ..errors import InvalidParameterError, ItbDivisionError
from ..logging_config import get_logger
from .segmentation_service import SegmentationMask
from .signal_service import GridImage

logger = get_logger(__name__)

Pixel = Tuple[int, int]


class ItbSource(str, Enum):
    RAW = "raw"
    ENHANCED = "enhanced"
    REFERENCE = "reference"


# ===========================================
# Types
# ===========================================

@dataclass(frozen=True)
class ItbInput:
    t_inside: float
    t_1d: float
    temps: Tuple[float, ...]
    line: Tuple[Pixel, ...] = ()

    def __post_init__(self):
        temps = tuple(float(t) for t in self.temps)
        line = tuple((int(r), int(c)) for r, c in self.line)
        if not temps:
            raise InvalidParameterError("I_tb needs at least one line temperature")
        if line and len(line) != len(temps):
            raise InvalidParameterError(f"line has {len(line)} pixels but {len(temps)} temperatures")
        if not all(math.isfinite(t) for t in temps + (float(self.t_inside), float(self.t_1d))):
            raise InvalidParameterError("I_tb inputs must be finite")
        object.__setattr__(self, "temps", temps)
        object.__setattr__(self, "line", line)
        object.__setattr__(self, "t_inside", float(self.t_inside))
        object.__setattr__(self, "t_1d", float(self.t_1d))

    @property
    def n(self) -> int:
        return len(self.temps)


@dataclass(frozen=True)
class ItbReport:
    itb: float
    n: int
    inputs: ItbInput
    source: ItbSource = ItbSource.RAW

    def to_dict(self) -> Dict[str, Any]:
        return {
            "I_tb": self.itb,
            "N": self.n,
            "source": self.source.value,
            "T_i": self.inputs.t_inside,
            "T_1D": self.inputs.t_1d,
            "line": [list(p) for p in self.inputs.line],
            "temps": list(self.inputs.temps),
        }


@dataclass(frozen=True, eq=False)
class LineSample:
    pixels: Tuple[Pixel, ...]
    temps: np.ndarray

    def to_input(self, t_inside: float, t_1d: float) -> ItbInput:
        return ItbInput(t_inside=t_inside, t_1d=t_1d, temps=tuple(self.temps.tolist()), line=self.pixels)


@dataclass(frozen=True)
class ComparisonRow:
    source: str
    itb: float
    abs_error: float


@dataclass
class ItbComparison:
    reference: float
    rows: List[ComparisonRow]
    improvement: Optional[float]
    note: str = ""
    reported_improvement: Optional[float] = None
    discrepancy: Optional[float] = None

    @property
    def improvement_percent(self) -> Optional[float]:
        return None if self.improvement is None else 100.0 * self.improvement

    def to_dict(self) -> Dict[str, Any]:
        return {
            "reference": self.reference,
            "rows": [row.__dict__ for row in self.rows],
            "improvement": self.improvement,
            "improvement_percent": self.improvement_percent,
            "reported_improvement": self.reported_improvement,
            "discrepancy": self.discrepancy,
            "note": self.note,
        }


# ===========================================
# Index
# ===========================================

def compute_itb(inp: ItbInput, source: Union[str, ItbSource] = ItbSource.RAW) -> ItbReport:
    """
    Raises:
        ItbDivisionError: T_i equals T_1D
    """
    denominator = inp.t_inside - inp.t_1d
    if denominator == 0.0:
        raise ItbDivisionError(
            f"T_i equals T_1D ({inp.t_inside:g}); I_tb is undefined",
            {"T_i": inp.t_inside, "T_1D": inp.t_1d, "N": inp.n},
        )
    temps = np.asarray(inp.temps, dtype=np.float64)
    value = float(np.sum(inp.t_inside - temps) / (inp.n * denominator))
    return ItbReport(itb=value, n=inp.n, inputs=inp, source=ItbSource(source))


def sample_line(img: GridImage, start: Pixel, end: Pixel) -> LineSample:
    """Bresenham line between two 1-based pixels, with their temperatures."""
    for name, (r, c) in (("start", start), ("end", end)):
        if not (1 <= r <= img.rows and 1 <= c <= img.cols):
            raise InvalidParameterError(
                f"line {name} ({r}, {c}) outside the {img.rows}x{img.cols} image"
            )
    rr, cc = raster_line(int(start[0]) - 1, int(start[1]) - 1, int(end[0]) - 1, int(end[1]) - 1)
    pixels = tuple((int(r) + 1, int(c) + 1) for r, c in zip(rr, cc))
    return LineSample(pixels=pixels, temps=np.asarray(img.values[rr, cc], dtype=np.float64))


def parse_line(text: str) -> Tuple[Pixel, Pixel]:
    """``"r1,c1:r2,c2"`` -> ((r1, c1), (r2, c2))."""
    try:
        first, second = text.split(":")
        r1, c1 = (int(v) for v in first.split(","))
        r2, c2 = (int(v) for v in second.split(","))
    except ValueError as exc:
        raise InvalidParameterError(f"line must look like r1,c1:r2,c2, got {text!r}") from exc
    return (r1, c1), (r2, c2)


def estimate_t1d(img: GridImage, mask: SegmentationMask, bins: int = DEFAULT_BINS) -> float:
    """T_1D as the center of the most populated histogram bin of the A_E area."""
    if mask.shape != img.shape:
        raise InvalidParameterError(f"mask {mask.shape} does not match image {img.shape}")
    external = img.values[~mask.mask]
    if external.size == 0:
        raise InvalidParameterError("no undisturbed-zone pixels to estimate T_1D from")
    if external.max() == external.min():
        return float(external[0])
    counts, edges = np.histogram(external, bins=bins)
    peak = int(np.argmax(counts))
    return float(0.5 * (edges[peak] + edges[peak + 1]))


# ===========================================
# Comparison
# ===========================================

def compare_itb(reports: Sequence[ItbReport], reference: ItbReport,
                reported_improvement: Optional[float] = None) -> ItbComparison:
    """
    Absolute error of every report against the reference, and the
    improvement of the enhanced index over the raw one:
        1 - |enhanced - ref| / |raw - ref|
    Undefined (None) when the raw error is zero.
    """
    ref = reference.itb
    rows = [ComparisonRow(source=r.source.value, itb=r.itb, abs_error=abs(r.itb - ref)) for r in reports]
    raw = next((r for r in reports if r.source is ItbSource.RAW), None)
    enhanced = next((r for r in reports if r.source is ItbSource.ENHANCED), None)

    improvement: Optional[float] = None
    note = ""
    if raw is None or enhanced is None:
        note = "improvement needs one raw and one enhanced report"
    else:
        raw_error = abs(raw.itb - ref)
        if raw_error == 0.0:
            note = "raw index equals the reference; improvement undefined"
            logger.warning(note)
        else:
            improvement = 1.0 - abs(enhanced.itb - ref) / raw_error

    discrepancy = None
    if reported_improvement is not None and improvement is not None:
        discrepancy = improvement - reported_improvement
        if abs(discrepancy) > IMPROVEMENT_DISCREPANCY_LIMIT:
            note = (
                f"recomputed improvement {100 * improvement:.2f}% differs from the reported "
                f"{100 * reported_improvement:.2f}% by {100 * discrepancy:+.2f} points"
            )
            logger.warning(note)
    return ItbComparison(reference=ref, rows=rows, improvement=improvement, note=note,
                         reported_improvement=reported_improvement, discrepancy=discrepancy)


def report_from_value(value: float, source: Union[str, ItbSource], n: int = 1) -> ItbReport:
    """Report for an externally measured index (e.g. the heat-flux meter reference)."""
    placeholder = ItbInput(t_inside=1.0, t_1d=0.0, temps=tuple([1.0 - value] * max(n, 1)))
    return ItbReport(itb=float(value), n=max(n, 1), inputs=placeholder, source=ItbSource(source))
