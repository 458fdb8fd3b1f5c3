"""
Sampling Kantorovich Thermography Toolkit - API v1 Endpoints

JSON matrices in, JSON reports out. Computations run in FastAPI's
threadpool (plain ``def`` handlers); toolkit errors are turned into
ErrorResponse bodies by the handlers registered in ``app.main``.

===========================================
ENDPOINT SUMMARY
===========================================

Health & Status:
    GET  /health                   - API health check
    GET  /presets                  - Named enhancement presets

Kernels:
    GET  /kernels/{spec}/axioms    - Kernel condition estimates

Enhancement:
    POST /enhance                  - S-K enhancement of a matrix

Segmentation:
    POST /segment                  - Histogram threshold, mask and contours

Energy index:
    POST /itb                      - I_tb along a line or of explicit temperatures
    POST /itb/compare              - Raw vs enhanced I_tb against a reference

===========================================
Author: SK Thermography Team
===========================================
"""

from datetime import datetime
from typing import Any, Dict, List

import numpy as np
from fastapi import APIRouter, Query

from app import __version__
from app.config import PRESETS
from app.errors import InvalidParameterError
from app.logging_config import get_logger
from app.models.schemas import (
    EnhanceReport,
    EnhanceRequest,
    EnhanceResponse,
    HealthResponse,
    ItbCompareRequest,
    ItbComparisonResponse,
    ItbReportModel,
    ItbRequest,
    KernelAxiomsResponse,
    SegmentRequest,
    SegmentResponse,
    ThresholdReportModel,
)
from app.services.energy_service import (
    ItbInput,
    ItbSource,
    compare_itb,
    compute_itb,
    parse_line,
    report_from_value,
    sample_line,
)
from app.services.pipeline_service import histogram_report, segmentation_summary
from app.services.segmentation_service import contours, detect_threshold, segment
from app.services.signal_service import GridImage
from app.services.sk_engine import config_from_preset, enhance, kernel_check, memory_estimate

logger = get_logger(__name__)

router = APIRouter()


def _image_from(values: List[List[float]], resolution: float = 1e-2) -> GridImage:
    try:
        array = np.asarray(values, dtype=np.float64)
    except ValueError as exc:
        raise InvalidParameterError(f"values must be a rectangular matrix of numbers ({exc})") from exc
    return GridImage(array, resolution=resolution)


# ===========================================
# Health Check Endpoint
# ===========================================

@router.get("/health", response_model=HealthResponse)
async def health_check():
    """
    Health check endpoint.

    Returns:
        HealthResponse: Status object indicating API health
    """
    logger.debug("Health check requested")
    return HealthResponse(
        status="healthy",
        timestamp=datetime.now().isoformat(),
        version=__version__,
    )


@router.get("/presets")
async def list_presets() -> Dict[str, Dict[str, Any]]:
    return PRESETS


# ===========================================
# Kernel Endpoints
# ===========================================

@router.get("/kernels/{spec}/axioms", response_model=KernelAxiomsResponse)
def kernel_axioms(spec: str, beta: float = Query(1.0, gt=0, description="Absolute moment order")):
    """
    Numerical estimates of the kernel conditions for a univariate kernel
    spec such as ``bspline:3``, ``jackson:12:1`` or ``fejer``.
    """
    return KernelAxiomsResponse(**kernel_check(spec, beta=beta))


# ===========================================
# Enhancement Endpoint
# ===========================================

@router.post("/enhance", response_model=EnhanceResponse)
def enhance_image(request: EnhanceRequest):
    """
    Enhance a matrix with the S-K operator.

    Preset values apply to every parameter left unset in the request.
    """
    img = _image_from(request.values, request.resolution)
    cfg = config_from_preset(
        request.preset,
        kernel=request.kernel,
        w=request.w,
        R=request.R,
        strategy=request.strategy,
        truncation_override=request.truncation_override,
        kernel_truncation_radius=request.kernel_truncation_radius,
        boundary=request.boundary,
    )
    result = enhance(img, cfg, threads=request.threads)
    recompute_bits, precompute_bits = memory_estimate(img, cfg)
    report = EnhanceReport(
        **result.to_report(),
        memory_estimates={"recompute": recompute_bits, "precompute": precompute_bits},
    )
    return EnhanceResponse(report=report, values=result.image.values.tolist())


# ===========================================
# Segmentation Endpoint
# ===========================================

@router.post("/segment", response_model=SegmentResponse)
def segment_image(request: SegmentRequest):
    img = _image_from(request.values)
    histogram, threshold = detect_threshold(img, request.bins, request.smooth, request.auto_rebin)
    mask = segment(img, threshold.T_m, request.bridge_is_cold)
    pixels = contours(mask)
    return SegmentResponse(
        histogram=histogram_report(histogram),
        threshold=ThresholdReportModel(**threshold.to_dict()),
        segmentation=segmentation_summary(mask, len(pixels)),
        mask=mask.mask.astype(np.int64).tolist(),
        contours=[list(p) for p in pixels],
    )


# ===========================================
# Energy Index Endpoints
# ===========================================

@router.post("/itb", response_model=ItbReportModel)
def incidence_factor(request: ItbRequest):
    """I_tb of explicit line temperatures, or of a line sampled from ``values``."""
    if request.temps is not None:
        inp = ItbInput(t_inside=request.t_inside, t_1d=request.t_1d, temps=tuple(request.temps))
    else:
        start, end = parse_line(request.line)
        inp = sample_line(_image_from(request.values), start, end).to_input(request.t_inside, request.t_1d)
    return ItbReportModel(**compute_itb(inp, request.source).to_dict())


@router.post("/itb/compare", response_model=ItbComparisonResponse)
def compare_incidence_factors(request: ItbCompareRequest):
    reports = [report_from_value(request.raw, ItbSource.RAW),
               report_from_value(request.enhanced, ItbSource.ENHANCED)]
    comparison = compare_itb(reports, report_from_value(request.reference, ItbSource.REFERENCE),
                             request.reported_improvement)
    return ItbComparisonResponse(**comparison.to_dict())
