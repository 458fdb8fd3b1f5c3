"""
Sampling Kantorovich Thermography Toolkit - Pydantic Schemas

This module contains Pydantic models for request/response validation,
API documentation and the JSON reports written by the CLI and pipeline.

Author: SK Thermography Team
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, model_validator

from ..config import DEFAULT_BINS, DEFAULT_MEASUREMENT_RESOLUTION, DEFAULT_PRESET, DEFAULT_SMOOTH_WINDOW


# ===========================================
# Health / Error Schemas
# ===========================================

class HealthResponse(BaseModel):
    """Response model for health check endpoint."""
    status: str = Field(..., description="Health status", examples=["healthy"])
    timestamp: str = Field(..., description="Current timestamp", examples=["2026-01-15T10:30:00"])
    version: str = Field(..., description="API version", examples=["1.0.0"])


class ErrorResponse(BaseModel):
    """Standard error response model."""
    detail: str = Field(..., description="Error message")
    error_code: Optional[str] = Field(None, description="Error code for programmatic handling")
    diagnostic: Optional[Dict[str, Any]] = Field(None, description="Numbers that explain the failure")


# ===========================================
# Kernel Schemas
# ===========================================

class KernelAxiomsResponse(BaseModel):
    """Numerical estimates of the kernel conditions on a finite lattice."""
    kernel: str = Field(..., description="Kernel spec", examples=["jackson:12:1"])
    normalization: float = Field(..., description="c_k for Jackson kernels, 1 otherwise")
    support_radius: Optional[float] = Field(None, description="Half-width of the support; null if unbounded")
    summability_estimate: float = Field(..., ge=0)
    partition_of_unity_max_deviation: float = Field(..., ge=0)
    moment_beta: float = Field(..., gt=0)
    moment_estimate: float = Field(..., ge=0)
    origin_bound: float = Field(..., ge=0, description="max |kernel| on [-1, 1]")
    l1_norm_estimate: float = Field(..., ge=0)
    grid_spec: str = Field(..., description="Test lattice description")
    constant_reproduction_1d: Optional[float] = Field(
        None, description="max |S_w 1 - 1| of the 1-D operator on a constant signal"
    )


# ===========================================
# Enhancement Schemas
# ===========================================

class EnhanceRequest(BaseModel):
    """Image plus enhancement settings (preset values unless overridden)."""
    values: List[List[float]] = Field(..., description="Row-major matrix of samples")
    resolution: float = Field(DEFAULT_MEASUREMENT_RESOLUTION, gt=0, description="Measurement resolution P")
    preset: str = Field(DEFAULT_PRESET, description="Named preset supplying every unset parameter")
    kernel: Optional[str] = Field(None, description="Kernel spec", examples=["bspline:3"])
    w: Optional[float] = Field(None, gt=0)
    R: Optional[float] = Field(None, ge=1)
    strategy: Optional[Literal["recompute", "precompute"]] = None
    truncation_override: Optional[float] = Field(None, ge=0)
    kernel_truncation_radius: Optional[float] = Field(None, gt=0)
    boundary: Optional[Literal["replicate", "zero"]] = None
    threads: Optional[int] = Field(None, ge=0)


class EnhanceReport(BaseModel):
    """Parameters and cost figures of one enhancement run."""
    kernel: str
    w: float
    R: float
    strategy: str
    input_shape: List[int]
    output_shape: List[int]
    k_bar: float = Field(..., description="Applied truncation threshold")
    k_bar_formula: float = Field(..., description="0.4 P / (max(w^2 N M, window terms) A)")
    neglected_term_bound: float = Field(..., description="Upper bound of the neglected contribution per pixel")
    agreement_bound: float = Field(..., description="max(w^2 N M, window terms) k_bar A")
    offset_classes: List[int]
    elapsed_seconds: float
    timings: Dict[str, float]
    est_memory_bits: float
    memory_estimates: Dict[str, float] = Field(default_factory=dict)
    threads: int


class EnhanceResponse(BaseModel):
    report: EnhanceReport
    values: List[List[float]]


# ===========================================
# Segmentation Schemas
# ===========================================

class HistogramReport(BaseModel):
    bins: int
    bin_width: float
    smoothing_window: int
    total: int
    edges: List[float]
    counts: List[float]


class ThresholdReportModel(BaseModel):
    """Peaks, valley and tie-break provenance of the threshold detection."""
    T_P1: float
    T_P2: float
    P1: float
    P2: float
    T_m: float
    tie_broken: bool
    valley_candidates: List[float]
    refined_candidates: List[float] = Field(default_factory=list, description="Raw-count ties in the refinement window")
    smoothed_valley: float
    valley_depth: float = Field(..., description="Smoothed valley count over the lower peak count")
    otsu_threshold: float = Field(..., description="Otsu threshold of the same histogram, for comparison")
    bins: int
    bin_width: float
    rebin_attempts: List[int] = Field(default_factory=list)


class SegmentRequest(BaseModel):
    values: List[List[float]]
    bins: int = Field(DEFAULT_BINS, ge=2)
    smooth: int = Field(DEFAULT_SMOOTH_WINDOW, ge=1)
    bridge_is_cold: bool = True
    auto_rebin: bool = False


class SegmentationSummary(BaseModel):
    threshold: float
    bridge_is_cold: bool
    bridge_area: int = Field(..., description="|A_B| in pixels")
    external_area: int = Field(..., description="|A_E| in pixels")
    contour_pixels: int


class SegmentResponse(BaseModel):
    histogram: HistogramReport
    threshold: ThresholdReportModel
    segmentation: SegmentationSummary
    mask: List[List[int]]
    contours: List[List[int]]


# ===========================================
# Energy Index Schemas
# ===========================================

class ItbRequest(BaseModel):
    """Either an image plus a line, or the line temperatures directly."""
    values: Optional[List[List[float]]] = None
    line: Optional[str] = Field(None, description="r1,c1:r2,c2 (1-based)", examples=["1,1:1,4"])
    temps: Optional[List[float]] = None
    t_inside: float = Field(..., description="Internal air temperature T_i")
    t_1d: float = Field(..., description="Undisturbed-zone surface temperature T_1D")
    source: Literal["raw", "enhanced", "reference"] = "raw"

    @model_validator(mode="after")
    def check_inputs(self):
        if self.temps is None and (self.values is None or self.line is None):
            raise ValueError("provide temps, or values together with line")
        return self


class ItbReportModel(BaseModel):
    I_tb: float
    N: int
    source: str
    T_i: float
    T_1D: float
    line: List[List[int]] = Field(default_factory=list)
    temps: List[float]


class ItbCompareRequest(BaseModel):
    raw: float
    enhanced: float
    reference: float
    reported_improvement: Optional[float] = Field(None, description="Fraction, e.g. 0.15")


class ItbComparisonRow(BaseModel):
    source: str
    itb: float
    abs_error: float


class ItbComparisonResponse(BaseModel):
    reference: float
    rows: List[ItbComparisonRow]
    improvement: Optional[float] = Field(None, description="1 - |enhanced - ref| / |raw - ref|")
    improvement_percent: Optional[float] = None
    reported_improvement: Optional[float] = None
    discrepancy: Optional[float] = None
    note: str = ""


# ===========================================
# Benchmark Schemas
# ===========================================

class BenchRow(BaseModel):
    rows: int
    cols: int
    w: float
    strategy: str
    median_seconds: float
    min_seconds: float
    max_seconds: float
    est_memory_bits: float
    max_abs_diff: float = Field(..., description="Strategy disagreement on the benchmark input")
    neglected_term_bound: float
    within_bound: bool = Field(..., description="Strategies agree within the truncation bound")
    speedup: Optional[float] = Field(None, description="recompute median / precompute median")


class BenchReport(BaseModel):
    kernel: str
    repetitions: int
    single_threaded: bool
    seed: int
    kernel_construction_seconds: float
    note: str
    speedups: List[str] = Field(default_factory=list, description="One line per precompute cell: recompute / precompute median")
    rows: List[BenchRow]


# ===========================================
# Pipeline Schemas
# ===========================================

class PipelineConfig(BaseModel):
    """Everything needed to reproduce one pipeline run."""
    input_path: str = Field(..., description="CSV or PGM thermogram")
    input_format: Optional[Literal["csv", "pgm"]] = None
    resolution: float = Field(DEFAULT_MEASUREMENT_RESOLUTION, gt=0)
    preset: str = DEFAULT_PRESET
    kernel: Optional[str] = None
    w: Optional[float] = Field(None, gt=0)
    R: Optional[float] = Field(None, ge=1)
    strategy: Optional[Literal["recompute", "precompute"]] = None
    truncation_override: Optional[float] = Field(None, ge=0)
    boundary: Literal["replicate", "zero"] = "replicate"
    bins: int = Field(DEFAULT_BINS, ge=2)
    smooth: int = Field(DEFAULT_SMOOTH_WINDOW, ge=1)
    auto_rebin: bool = True
    bridge_is_cold: bool = True
    line: Optional[str] = Field(None, description="r1,c1:r2,c2 in input pixels (1-based)")
    t_inside: Optional[float] = None
    t_1d: Optional[float] = None
    output_dir: str = Field(..., description="Directory receiving every output file")
    output_format: Literal["csv", "pgm"] = "csv"
    threads: Optional[int] = Field(None, ge=0)

    @model_validator(mode="after")
    def check_itb(self):
        if self.line is not None and self.t_inside is None:
            raise ValueError("an I_tb line needs t_inside")
        return self


class RunReport(BaseModel):
    status: Literal["ok", "failed"]
    failed_stage: Optional[str] = None
    error: Optional[ErrorResponse] = None
    config: PipelineConfig
    enhance: Optional[EnhanceReport] = None
    histogram: Optional[HistogramReport] = None
    threshold: Optional[ThresholdReportModel] = None
    segmentation: Optional[SegmentationSummary] = None
    itb: List[ItbReportModel] = Field(default_factory=list)
    files: Dict[str, str] = Field(default_factory=dict)
    stage_seconds: Dict[str, float] = Field(default_factory=dict)
