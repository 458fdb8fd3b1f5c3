"""
Pipeline Service

End-to-end run on one thermogram:
    ingest -> enhance -> histogram -> threshold -> segment -> contours -> itb -> write

The enhanced image is segmented with the threshold of its own histogram.
When an I_tb line is given (in input pixels) the index is computed on the
raw image and, with the line mapped onto the output grid, on the enhanced
one. Every file and intermediate parameter lands in ``run_report.json``;
a failing stage is recorded there before the error propagates.

Also home of the synthetic phantoms standing in for real thermograms.

Author: SK Thermography Team
"""

import time
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from ..config import (
    CONTOURS_FILE,
    ENHANCED_STEM,
    MASK_FILE,
    PHANTOM_BRIDGE_TEMPERATURE,
    PHANTOM_DEFAULT_SIZE,
    PHANTOM_FIELD_TEMPERATURE,
    PHANTOM_MIN_SIZE,
    PHANTOM_NOISE_SIGMA,
    RUN_CONFIG_FILE,
    RUN_REPORT_FILE,
)
from ..errors import InvalidParameterError, SKError, StageError
from ..logging_config import get_logger
from ..models.schemas import (
    EnhanceReport,
    ErrorResponse,
    HistogramReport,
    ItbReportModel,
    PipelineConfig,
    RunReport,
    SegmentationSummary,
    ThresholdReportModel,
)
from .energy_service import ItbSource, compute_itb, estimate_t1d, parse_line, sample_line
from .image_io_service import read_image, write_contours_csv, write_image, write_json, write_mask_pgm
from .segmentation_service import (
    Histogram,
    SegmentationMask,
    build_histogram,
    contours,
    detect_threshold,
    segment,
)
from .signal_service import GridImage, input_pixel_to_output, output_pixel_to_input
from .sk_engine import config_from_preset, enhance, memory_estimate

logger = get_logger(__name__)

STAGES = ("ingest", "enhance", "histogram", "threshold", "segment", "contours", "itb", "write")


# ===========================================
# Phantoms
# ===========================================

class PhantomKind(str, Enum):
    PILLAR = "pillar"
    BEAM_PILLAR_JOINT = "beam_pillar_joint"


@dataclass(frozen=True, eq=False)
class Phantom:
    image: GridImage
    truth: np.ndarray
    kind: PhantomKind
    bridge_temperature: float
    field_temperature: float


def phantom_mask(kind: Union[str, PhantomKind], size: Tuple[int, int]) -> np.ndarray:
    """
    Ground-truth bridge area: a vertical stripe over the middle quarter of
    the columns (pillar), plus a horizontal band joined to its top running
    to the right edge (beam-pillar joint, an L-shaped region).
    """
    rows, cols = size
    mask = np.zeros((rows, cols), dtype=bool)
    c0, c1 = (3 * cols) // 8, (5 * cols) // 8
    if PhantomKind(kind) is PhantomKind.PILLAR:
        mask[:, c0:c1] = True
    else:
        r0, r1 = rows // 8, (3 * rows) // 8
        mask[r0:, c0:c1] = True
        mask[r0:r1, c0:] = True
    return mask


def phantom(
    kind: Union[str, PhantomKind] = PhantomKind.PILLAR,
    size: Tuple[int, int] = PHANTOM_DEFAULT_SIZE,
    temps: Tuple[float, float] = (PHANTOM_BRIDGE_TEMPERATURE, PHANTOM_FIELD_TEMPERATURE),
    noise: float = PHANTOM_NOISE_SIGMA,
    seed: int = 0,
) -> Phantom:
    """
    Deterministic synthetic thermogram: the bridge region at ``temps[0]``
    over a field at ``temps[1]``, plus seeded Gaussian noise of std ``noise``.
    """
    try:
        kind = PhantomKind(kind)
    except ValueError as exc:
        raise InvalidParameterError(f"unknown phantom kind {kind!r} (pillar | beam_pillar_joint)") from exc
    rows, cols = int(size[0]), int(size[1])
    if rows < PHANTOM_MIN_SIZE or cols < PHANTOM_MIN_SIZE:
        raise InvalidParameterError(f"phantom size must be >= {PHANTOM_MIN_SIZE}x{PHANTOM_MIN_SIZE}, got {rows}x{cols}")
    bridge_t, field_t = float(temps[0]), float(temps[1])
    if bridge_t == field_t:
        raise InvalidParameterError("phantom region temperatures must differ")
    if noise < 0:
        raise InvalidParameterError(f"noise sigma must be >= 0, got {noise!r}")

    truth = phantom_mask(kind, (rows, cols))
    values = np.where(truth, bridge_t, field_t).astype(np.float64)
    if noise > 0:
        values = values + np.random.default_rng(seed).normal(0.0, noise, size=values.shape)
    truth.flags.writeable = False
    return Phantom(image=GridImage(values), truth=truth, kind=kind,
                   bridge_temperature=bridge_t, field_temperature=field_t)


# ===========================================
# Grid Helpers
# ===========================================

def resample_mask(mask: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """
    Nearest-center resampling of a mask onto another grid covering the same
    domain: each target pixel takes the source pixel containing its center.
    """
    src = np.asarray(mask, dtype=bool)
    picks = []
    for axis in (0, 1):
        n, size = src.shape[axis], shape[axis]
        picks.append([output_pixel_to_input(i, size / n, n) - 1 for i in range(1, size + 1)])
    return src[np.ix_(*picks)]


def map_line_to_output(start: Tuple[int, int], end: Tuple[int, int], R: float,
                       out_shape: Tuple[int, int]) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    def convert(p: Tuple[int, int]) -> Tuple[int, int]:
        return (input_pixel_to_output(p[0], R, out_shape[0]), input_pixel_to_output(p[1], R, out_shape[1]))
    return convert(start), convert(end)


def histogram_report(h: Histogram) -> HistogramReport:
    return HistogramReport(
        bins=h.bins,
        bin_width=h.bin_width,
        smoothing_window=h.smoothing_window,
        total=h.total,
        edges=h.bin_edges.tolist(),
        counts=h.counts.astype(np.float64).tolist(),
    )


def segmentation_summary(mask: SegmentationMask, contour_pixels: int) -> SegmentationSummary:
    return SegmentationSummary(
        threshold=mask.threshold,
        bridge_is_cold=mask.bridge_is_cold,
        bridge_area=mask.bridge_area,
        external_area=mask.external_area,
        contour_pixels=contour_pixels,
    )


# ===========================================
# Pipeline
# ===========================================

@dataclass
class PipelineRun:
    report: RunReport
    enhanced: Optional[GridImage] = None
    mask: Optional[SegmentationMask] = None
    contour_pixels: Optional[List[Tuple[int, int]]] = None


class _StageClock:
    def __init__(self, report: RunReport):
        self.report = report

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        started = time.perf_counter()
        logger.info(f"Pipeline stage: {name}")
        try:
            yield
        except (SKError, OSError, ValueError, ArithmeticError) as exc:
            self.report.status = "failed"
            self.report.failed_stage = name
            detail = exc.message if isinstance(exc, SKError) else str(exc)
            self.report.error = ErrorResponse(
                detail=detail,
                error_code=getattr(exc, "error_code", type(exc).__name__),
                diagnostic=getattr(exc, "diagnostic", None),
            )
            logger.error(f"Stage '{name}' failed: {detail}")
            raise StageError(name, exc) from exc
        finally:
            self.report.stage_seconds[name] = time.perf_counter() - started


def _itb_report(img: GridImage, mask: SegmentationMask, start: Tuple[int, int], end: Tuple[int, int],
                 t_inside: float, t_1d: Optional[float], bins: int, source: ItbSource) -> ItbReportModel:
    line = sample_line(img, start, end)
    reference_t = t_1d if t_1d is not None else estimate_t1d(img, mask, bins)
    report = compute_itb(line.to_input(t_inside, reference_t), source)
    return ItbReportModel(**report.to_dict())


def run_pipeline(cfg: PipelineConfig) -> PipelineRun:
    """
    Execute every stage of ``cfg`` and write its outputs.

    Raises:
        StageError: wraps the first failing stage; the failure is recorded
            in the run report, which is still written when possible
    """
    out_dir = Path(cfg.output_dir)
    report = RunReport(status="ok", config=cfg)
    run = PipelineRun(report=report)
    clock = _StageClock(report)

    try:
        with clock.stage("ingest"):
            out_dir.mkdir(parents=True, exist_ok=True)
            raw = read_image(cfg.input_path, cfg.input_format, cfg.resolution)
            enhance_cfg = config_from_preset(
                cfg.preset,
                kernel=cfg.kernel,
                w=cfg.w,
                R=cfg.R,
                strategy=cfg.strategy,
                truncation_override=cfg.truncation_override,
                boundary=cfg.boundary,
            )
            line = parse_line(cfg.line) if cfg.line is not None else None

        with clock.stage("enhance"):
            result = enhance(raw, enhance_cfg, threads=cfg.threads)
            recompute_bits, precompute_bits = memory_estimate(raw, enhance_cfg)
            report.enhance = EnhanceReport(
                **result.to_report(),
                memory_estimates={"recompute": recompute_bits, "precompute": precompute_bits},
            )
            run.enhanced = result.image

        with clock.stage("histogram"):
            histogram = build_histogram(run.enhanced, cfg.bins, cfg.smooth)
            report.histogram = histogram_report(histogram)

        with clock.stage("threshold"):
            used, threshold = detect_threshold(run.enhanced, cfg.bins, cfg.smooth, cfg.auto_rebin)
            if used.bins != histogram.bins:
                # re-binned: report the histogram the threshold came from
                report.histogram = histogram_report(used)
            report.threshold = ThresholdReportModel(**threshold.to_dict())

        with clock.stage("segment"):
            run.mask = segment(run.enhanced, threshold.T_m, cfg.bridge_is_cold)

        with clock.stage("contours"):
            run.contour_pixels = contours(run.mask)
            report.segmentation = segmentation_summary(run.mask, len(run.contour_pixels))

        with clock.stage("itb"):
            if line is not None:
                start, end = line
                raw_mask = SegmentationMask(
                    mask=resample_mask(run.mask.mask, raw.shape),
                    threshold=run.mask.threshold,
                    bridge_is_cold=run.mask.bridge_is_cold,
                )
                report.itb.append(_itb_report(raw, raw_mask, start, end, cfg.t_inside, cfg.t_1d,
                                               cfg.bins, ItbSource.RAW))
                out_start, out_end = map_line_to_output(start, end, enhance_cfg.R, run.enhanced.shape)
                report.itb.append(_itb_report(run.enhanced, run.mask, out_start, out_end, cfg.t_inside,
                                               cfg.t_1d, cfg.bins, ItbSource.ENHANCED))

        with clock.stage("write"):
            enhanced_path = out_dir / f"{ENHANCED_STEM}.{cfg.output_format}"
            report.files = {
                "enhanced": str(write_image(run.enhanced, enhanced_path, cfg.output_format)),
                "mask": str(write_mask_pgm(run.mask.mask, out_dir / MASK_FILE)),
                "contours": str(write_contours_csv(run.contour_pixels, out_dir / CONTOURS_FILE)),
                "config": str(write_json(cfg, out_dir / RUN_CONFIG_FILE)),
                "report": str(out_dir / RUN_REPORT_FILE),
            }
            write_json(report, out_dir / RUN_REPORT_FILE)
    except StageError:
        _write_failure_report(report, out_dir)
        raise

    logger.info(
        f"Pipeline done: T_m={report.threshold.T_m:.4f}, A_B={report.segmentation.bridge_area} px, "
        f"{sum(report.stage_seconds.values()):.2f}s"
    )
    return run


def _write_failure_report(report: RunReport, out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        report.files["report"] = str(write_json(report, out_dir / RUN_REPORT_FILE))
    except OSError as exc:
        logger.error(f"Could not write the failure report to {out_dir}: {exc}")


def load_pipeline_config(payload: Dict[str, object]) -> PipelineConfig:
    """PipelineConfig from a serialized config (e.g. a previous run's pipeline_config.json)."""
    try:
        return PipelineConfig.model_validate(payload)
    except ValueError as exc:
        raise InvalidParameterError(f"invalid pipeline config: {exc}") from exc
