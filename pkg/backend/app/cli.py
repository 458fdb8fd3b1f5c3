"""
Sampling Kantorovich Thermography Toolkit - Command Line Interface

Usage:
    python -m app.cli enhance --in scan.csv --out enhanced.csv --preset paper-thermo --report enhance.json
    python -m app.cli segment --in enhanced.csv --bins 256 --smooth 5 --out-mask mask.pgm --report segment.json
    python -m app.cli itb --in scan.csv --line 10,1:10,64 --ti 20 --t1d 12.5 --out itb.json
    python -m app.cli itb-compare --raw raw.json --enhanced enhanced.json --ref reference.json
    python -m app.cli itb-compare --paper
    python -m app.cli bench --sizes 1,2,3,5,10 --w 1,4,9,25,100,400 --kernel jackson:2 --out bench.csv
    python -m app.cli pipeline --in scan.csv --output-dir runs/scan
    python -m app.cli phantom --kind pillar --out pillar.csv --truth pillar_truth.pgm
    python -m app.cli kernel-check --kernel jackson:12

Reports go to stdout as JSON, logs to stderr.
Exit codes: 0 success, 2 invalid input, 3 numeric failure.

Author: SK Thermography Team
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .config import (
    BENCH_DEFAULT_KERNEL,
    BENCH_DEFAULT_SEED,
    BENCH_DEFAULT_SIZES,
    BENCH_DEFAULT_W,
    BENCH_MIN_REPETITIONS,
    DEFAULT_BINS,
    DEFAULT_MEASUREMENT_RESOLUTION,
    DEFAULT_PRESET,
    DEFAULT_SMOOTH_WINDOW,
    EXIT_INVALID_INPUT,
    EXIT_OK,
    PAPER_ITB,
    PAPER_REPORTED_IMPROVEMENT,
    PAPER_THRESHOLDS_C,
    PHANTOM_BRIDGE_TEMPERATURE,
    PHANTOM_FIELD_TEMPERATURE,
    PHANTOM_NOISE_SIGMA,
    PRESETS,
    get_settings,
)
from .errors import InvalidParameterError, SKError
from .logging_config import get_logger
from .models.schemas import PipelineConfig

logger = get_logger(__name__)


# ===========================================
# Argument Parsing
# ===========================================

def _add_enhance_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", default=DEFAULT_PRESET, choices=sorted(PRESETS),
                        help="Named parameter set (default: %(default)s)")
    parser.add_argument("--kernel", help="Kernel spec overriding the preset, e.g. bspline:3 or jackson:12:1")
    parser.add_argument("--w", type=float, help="Sampling rate w > 0")
    parser.add_argument("--R", type=float, help="Scaling factor R >= 1")
    parser.add_argument("--strategy", choices=["recompute", "precompute"], help="Evaluation strategy")
    parser.add_argument("--truncation-override", type=float, help="Fixed truncation threshold k_bar")
    parser.add_argument("--boundary", choices=["replicate", "zero"], default="replicate")
    parser.add_argument("--threads", type=int, help="Worker threads (0 = all cores; default SK_THREADS)")


def _add_input_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--in", "--input", dest="input", required=True, help="CSV or PGM image")
    parser.add_argument("--format", choices=["csv", "pgm"], help="Input format (default: from suffix)")
    parser.add_argument("--resolution", type=float, default=DEFAULT_MEASUREMENT_RESOLUTION,
                        help="Measurement resolution P (default: %(default)s)")


def _add_segment_options(parser: argparse.ArgumentParser, rebin_by_default: bool = False) -> None:
    parser.add_argument("--bins", type=int, default=DEFAULT_BINS)
    parser.add_argument("--smooth", type=int, default=DEFAULT_SMOOTH_WINDOW, help="Odd moving-average window")
    if rebin_by_default:
        parser.add_argument("--no-auto-rebin", dest="auto_rebin", action="store_false",
                            help="Keep the requested binning even on shallow valleys")
    else:
        parser.add_argument("--auto-rebin", action="store_true", help="Try coarser binnings on shallow valleys")
    parser.add_argument("--hot", action="store_true", help="Bridge is the warm mode (default: cold)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sk-thermo",
        description="Sampling Kantorovich enhancement and thermal-bridge analysis of thermograms",
    )
    parser.add_argument("--debug", action="store_true", help="Verbose logging")
    sub = parser.add_subparsers(dest="command", required=True)

    enhance = sub.add_parser("enhance", help="Enhance an image with the S-K operator")
    _add_input_options(enhance)
    _add_enhance_options(enhance)
    enhance.add_argument("--out", "--output", dest="output", required=True, help="Enhanced image (.csv or .pgm)")
    enhance.add_argument("--report", help="Write the enhance report here instead of stdout")

    segment = sub.add_parser("segment", help="Histogram threshold and bridge mask")
    _add_input_options(segment)
    _add_segment_options(segment)
    segment.add_argument("--out-mask", "--mask", dest="mask", help="Mask output (PGM, 255 = bridge)")
    segment.add_argument("--contours", help="Contour pixel list (CSV)")
    segment.add_argument("--truth", help="Ground-truth mask (PGM) to score the segmentation against")
    segment.add_argument("--report", help="Write the segmentation report here instead of stdout")

    itb = sub.add_parser("itb", help="Incidence factor I_tb along a pixel line")
    itb.add_argument("--in", "--input", dest="input", help="Image to sample the line from")
    itb.add_argument("--format", choices=["csv", "pgm"])
    itb.add_argument("--line", help="r1,c1:r2,c2 (1-based)")
    itb.add_argument("--temps", help="Comma-separated line temperatures (instead of --input/--line)")
    itb.add_argument("--ti", "--t-inside", dest="t_inside", type=float, required=True,
                     help="Internal air temperature T_i")
    itb.add_argument("--t1d", "--t-1d", dest="t_1d", type=float, required=True,
                     help="Undisturbed-zone temperature T_1D")
    itb.add_argument("--source", choices=["raw", "enhanced", "reference"], default="raw")
    itb.add_argument("--out", help="Write the I_tb report here instead of stdout")

    compare = sub.add_parser("itb-compare", help="Compare raw and enhanced I_tb against a reference")
    compare.add_argument("--raw", help="I_tb report (JSON) or value of the raw thermogram")
    compare.add_argument("--enhanced", help="I_tb report (JSON) or value of the enhanced thermogram")
    compare.add_argument("--ref", "--reference", dest="reference", help="Reference I_tb report (JSON) or value")
    compare.add_argument("--reported", type=float, help="Reported improvement (fraction) to cross-check")
    compare.add_argument("--paper", action="store_true", help="Use the documented hot-box values")
    compare.add_argument("--out", help="Write the comparison here instead of stdout")

    bench = sub.add_parser("bench", help="Time the recompute and precompute strategies")
    bench.add_argument("--sizes", default=",".join(str(n) for n, _ in BENCH_DEFAULT_SIZES),
                       help="Square sizes N or NxM, comma separated")
    bench.add_argument("--w", default=",".join(f"{w:g}" for w in BENCH_DEFAULT_W))
    bench.add_argument("--kernel", default=BENCH_DEFAULT_KERNEL)
    bench.add_argument("--R", type=float, default=1.0)
    bench.add_argument("--repetitions", type=int, default=BENCH_MIN_REPETITIONS)
    bench.add_argument("--seed", type=int, default=BENCH_DEFAULT_SEED)
    bench.add_argument("--parallel", action="store_true", help="Use the worker pool (default single-threaded)")
    bench.add_argument("--out", help="Result table (.csv or .json)")

    pipeline = sub.add_parser("pipeline", help="enhance -> threshold -> segment -> I_tb in one run")
    pipeline.add_argument("--config", help="Serialized PipelineConfig (JSON); other options are ignored")
    pipeline.add_argument("--in", "--input", dest="input", help="CSV or PGM image")
    pipeline.add_argument("--format", choices=["csv", "pgm"])
    pipeline.add_argument("--resolution", type=float, default=DEFAULT_MEASUREMENT_RESOLUTION)
    _add_enhance_options(pipeline)
    _add_segment_options(pipeline, rebin_by_default=True)
    pipeline.add_argument("--line", help="I_tb line in input pixels, r1,c1:r2,c2")
    pipeline.add_argument("--ti", "--t-inside", dest="t_inside", type=float)
    pipeline.add_argument("--t1d", "--t-1d", dest="t_1d", type=float, help="Default: estimated from the undisturbed zone")
    pipeline.add_argument("--output-dir", help="Default: SK_OUTPUT_DIR")
    pipeline.add_argument("--output-format", choices=["csv", "pgm"], default="csv")

    phantom = sub.add_parser("phantom", help="Write a synthetic thermal-bridge thermogram")
    phantom.add_argument("--kind", choices=["pillar", "beam_pillar_joint"], default="pillar")
    phantom.add_argument("--size", default="128x128", help="NxM")
    phantom.add_argument("--temps", default=f"{PHANTOM_BRIDGE_TEMPERATURE:g},{PHANTOM_FIELD_TEMPERATURE:g}",
                         help="bridge,field temperatures")
    phantom.add_argument("--noise", type=float, default=PHANTOM_NOISE_SIGMA)
    phantom.add_argument("--seed", type=int, default=0)
    phantom.add_argument("--out", "--output", dest="output", required=True, help="Image (.csv or .pgm)")
    phantom.add_argument("--truth", help="Ground-truth mask (PGM)")

    check = sub.add_parser("kernel-check", help="Numerical kernel condition estimates")
    check.add_argument("--kernel", required=True, help="Univariate kernel spec")
    check.add_argument("--beta", type=float, default=1.0, help="Absolute moment order")

    return parser


# ===========================================
# Helpers
# ===========================================

def _emit(payload: Any, path: Optional[str] = None) -> None:
    from .services.image_io_service import write_json

    if path:
        write_json(payload, path)
        return
    if hasattr(payload, "model_dump_json"):
        print(payload.model_dump_json(indent=2))
    else:
        print(json.dumps(payload, indent=2))


def _float_list(text: str, name: str) -> List[float]:
    from .services.bench_service import parse_floats

    values = parse_floats(text, name)
    if not values:
        raise InvalidParameterError(f"{name} list is empty")
    return values


def _parse_size(text: str) -> tuple:
    from .services.bench_service import parse_sizes

    sizes = parse_sizes(text)
    if len(sizes) != 1:
        raise InvalidParameterError(f"expected one NxM size, got {text!r}")
    return sizes[0]


# ===========================================
# Commands
# ===========================================

def cmd_enhance(args: argparse.Namespace) -> int:
    from .models.schemas import EnhanceReport
    from .services.image_io_service import read_image, write_image
    from .services.sk_engine import config_from_preset, enhance, memory_estimate

    img = read_image(args.input, args.format, args.resolution)
    cfg = config_from_preset(args.preset, kernel=args.kernel, w=args.w, R=args.R, strategy=args.strategy,
                             truncation_override=args.truncation_override, boundary=args.boundary)
    result = enhance(img, cfg, threads=args.threads)
    write_image(result.image, args.output)
    recompute_bits, precompute_bits = memory_estimate(img, cfg)
    report = EnhanceReport(**result.to_report(),
                           memory_estimates={"recompute": recompute_bits, "precompute": precompute_bits})
    _emit(report, args.report)
    return EXIT_OK


def cmd_segment(args: argparse.Namespace) -> int:
    from .services.image_io_service import read_image, read_mask_pgm, write_contours_csv, write_mask_pgm
    from .services.pipeline_service import histogram_report, resample_mask, segmentation_summary
    from .services.segmentation_service import contours, detect_threshold, mask_agreement, segment

    img = read_image(args.input, args.format, args.resolution)
    histogram, threshold = detect_threshold(img, args.bins, args.smooth, args.auto_rebin)
    mask = segment(img, threshold.T_m, bridge_is_cold=not args.hot)
    pixels = contours(mask)
    if args.mask:
        write_mask_pgm(mask.mask, args.mask)
    if args.contours:
        write_contours_csv(pixels, args.contours)
    report = {
        "histogram": histogram_report(histogram).model_dump(),
        "threshold": threshold.to_dict(),
        "segmentation": segmentation_summary(mask, len(pixels)).model_dump(),
    }
    if args.truth:
        # a truth mask drawn on the raw grid is scored against an enhanced image too
        truth = resample_mask(read_mask_pgm(args.truth), mask.shape)
        report["agreement"] = mask_agreement(mask, truth)
    _emit(report, args.report)
    return EXIT_OK


def cmd_itb(args: argparse.Namespace) -> int:
    from .services.energy_service import ItbInput, compute_itb, parse_line, sample_line
    from .services.image_io_service import read_image

    if args.temps is not None:
        inp = ItbInput(t_inside=args.t_inside, t_1d=args.t_1d, temps=tuple(_float_list(args.temps, "temps")))
    elif args.input and args.line:
        img = read_image(args.input, args.format)
        start, end = parse_line(args.line)
        inp = sample_line(img, start, end).to_input(args.t_inside, args.t_1d)
    else:
        raise InvalidParameterError("itb needs --temps, or --in together with --line")
    _emit(compute_itb(inp, args.source).to_dict(), args.out)
    return EXIT_OK


def _itb_value(text: Optional[str], source: str) -> Optional[float]:
    """
    A bare number, an ``itb`` report file (its ``I_tb``), or a pipeline run
    report (the ``itb`` entry of ``source``).
    """
    from .services.image_io_service import read_json

    if text is None:
        return None
    try:
        return float(text)
    except ValueError:
        pass
    payload = read_json(text)
    if not isinstance(payload, dict):
        raise InvalidParameterError(f"{text}: expected a JSON object")
    if "I_tb" in payload:
        return float(payload["I_tb"])
    for entry in payload.get("itb") or []:
        if entry.get("source") == source:
            return float(entry["I_tb"])
    raise InvalidParameterError(f"{text}: no I_tb value for source {source!r}")


def cmd_itb_compare(args: argparse.Namespace) -> int:
    from .services.energy_service import ItbSource, compare_itb, report_from_value

    def compare(raw: float, enhanced: float, reference: float, reported: Optional[float]) -> Dict[str, Any]:
        reports = [report_from_value(raw, ItbSource.RAW), report_from_value(enhanced, ItbSource.ENHANCED)]
        return compare_itb(reports, report_from_value(reference, ItbSource.REFERENCE), reported).to_dict()

    if args.paper:
        _emit({
            bridge: {
                **compare(values["raw"], values["enhanced"], values["reference"],
                          PAPER_REPORTED_IMPROVEMENT.get(bridge)),
                "threshold_C": PAPER_THRESHOLDS_C.get(bridge),
            }
            for bridge, values in PAPER_ITB.items()
        }, args.out)
        return EXIT_OK
    raw = _itb_value(args.raw, "raw")
    enhanced = _itb_value(args.enhanced, "enhanced")
    reference = _itb_value(args.reference, "reference")
    if None in (raw, enhanced, reference):
        raise InvalidParameterError("itb-compare needs --raw, --enhanced and --ref (or --paper)")
    _emit(compare(raw, enhanced, reference, args.reported), args.out)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    from .services.bench_service import (
        BenchPlan,
        format_table,
        parse_sizes,
        run_bench,
        speedup_summary,
        write_bench_csv,
    )
    from .services.image_io_service import write_json

    plan = BenchPlan(
        sizes=tuple(parse_sizes(args.sizes)),
        w_values=tuple(_float_list(args.w, "w")),
        kernel=args.kernel,
        repetitions=args.repetitions,
        single_threaded=not args.parallel,
        seed=args.seed,
        R=args.R,
    )
    result = run_bench(plan)
    report = result.to_report()
    if args.out:
        if Path(args.out).suffix.lower() == ".json":
            write_json(report, args.out)
        else:
            write_bench_csv(result, args.out)
    for strategy in ("recompute", "precompute"):
        logger.info(f"Median seconds, {strategy}:\n{format_table(result, strategy)}")
    logger.info(f"Speedups:\n{speedup_summary(result)}")
    _emit(report)
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    from .services.image_io_service import read_json
    from .services.pipeline_service import load_pipeline_config, run_pipeline

    if args.config:
        cfg = load_pipeline_config(read_json(args.config))
    else:
        if not args.input:
            raise InvalidParameterError("pipeline needs --in or --config")
        try:
            cfg = PipelineConfig(
                input_path=args.input,
                input_format=args.format,
                resolution=args.resolution,
                preset=args.preset,
                kernel=args.kernel,
                w=args.w,
                R=args.R,
                strategy=args.strategy,
                truncation_override=args.truncation_override,
                boundary=args.boundary,
                bins=args.bins,
                smooth=args.smooth,
                auto_rebin=args.auto_rebin,
                bridge_is_cold=not args.hot,
                line=args.line,
                t_inside=args.t_inside,
                t_1d=args.t_1d,
                output_dir=args.output_dir or get_settings().output_dir,
                output_format=args.output_format,
                threads=args.threads,
            )
        except ValueError as exc:
            raise InvalidParameterError(f"invalid pipeline options: {exc}") from exc
    run = run_pipeline(cfg)
    _emit(run.report)
    return EXIT_OK


def cmd_phantom(args: argparse.Namespace) -> int:
    from .services.image_io_service import write_image, write_mask_pgm
    from .services.pipeline_service import phantom

    temps = _float_list(args.temps, "temps")
    if len(temps) != 2:
        raise InvalidParameterError("--temps needs exactly two values: bridge,field")
    generated = phantom(args.kind, _parse_size(args.size), (temps[0], temps[1]), args.noise, args.seed)
    write_image(generated.image, args.output)
    if args.truth:
        write_mask_pgm(generated.truth, args.truth)
    _emit({
        "kind": generated.kind.value,
        "shape": list(generated.image.shape),
        "bridge_temperature": generated.bridge_temperature,
        "field_temperature": generated.field_temperature,
        "bridge_pixels": int(np.count_nonzero(generated.truth)),
        "output": args.output,
        "truth": args.truth,
    })
    return EXIT_OK


def cmd_kernel_check(args: argparse.Namespace) -> int:
    from .services.sk_engine import kernel_check

    _emit(kernel_check(args.kernel, beta=args.beta))
    return EXIT_OK


COMMANDS = {
    "enhance": cmd_enhance,
    "segment": cmd_segment,
    "itb": cmd_itb,
    "itb-compare": cmd_itb_compare,
    "bench": cmd_bench,
    "pipeline": cmd_pipeline,
    "phantom": cmd_phantom,
    "kernel-check": cmd_kernel_check,
}


# ===========================================
# Entry Point
# ===========================================

def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.debug:
        app_logger = logging.getLogger("app")
        app_logger.setLevel(logging.DEBUG)
        for handler in app_logger.handlers:
            handler.setLevel(logging.DEBUG)

    try:
        return COMMANDS[args.command](args)
    except SKError as exc:
        logger.error(f"{args.command}: {exc.message}")
        print(json.dumps(exc.to_dict(), indent=2, default=str), file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, PermissionError) as exc:
        logger.error(f"{args.command}: {exc}")
        print(json.dumps({"error_code": "io_error", "detail": str(exc)}, indent=2), file=sys.stderr)
        return EXIT_INVALID_INPUT


if __name__ == "__main__":
    sys.exit(main())
