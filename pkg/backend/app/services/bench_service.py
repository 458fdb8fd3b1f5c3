"""
Benchmark Service

Wall-clock comparison of the two evaluation strategies of the enhance
engine over a grid of matrix sizes and sampling rates w:
- recompute: kernel values evaluated again for every output pixel
- precompute: truncated kernel matrices built once per offset class

Times cover the kernel-matrix construction plus the evaluation loop of a
run (cell means excluded). The kernel itself (e.g. the Jackson c_k
quadrature) is built once per benchmark and reported separately.

Author: SK Thermography Team
"""

import csv
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import (
    BENCH_AGREEMENT_SLACK,
    BENCH_DEFAULT_KERNEL,
    BENCH_DEFAULT_R,
    BENCH_DEFAULT_SEED,
    BENCH_DEFAULT_SIZES,
    BENCH_DEFAULT_W,
    BENCH_MIN_REPETITIONS,
    BENCH_TIMING_FLOOR,
    BENCH_VALUE_RANGE,
)
from ..errors import InvalidParameterError
from ..logging_config import get_logger
from ..models.schemas import BenchReport, BenchRow
from .kernel_service import bivariate_kernel
from .signal_service import GridImage
from .sk_engine import EnhanceConfig, EnhanceResult, Strategy, enhance

logger = get_logger(__name__)

BENCH_CSV_COLUMNS = list(BenchRow.model_fields)


# ===========================================
# Plan and Result Types
# ===========================================

@dataclass(frozen=True)
class BenchPlan:
    sizes: Tuple[Tuple[int, int], ...] = tuple(BENCH_DEFAULT_SIZES)
    w_values: Tuple[float, ...] = tuple(BENCH_DEFAULT_W)
    kernel: str = BENCH_DEFAULT_KERNEL
    repetitions: int = BENCH_MIN_REPETITIONS
    single_threaded: bool = True
    seed: int = BENCH_DEFAULT_SEED
    R: float = BENCH_DEFAULT_R
    truncation_override: Optional[float] = None

    def __post_init__(self):
        sizes = tuple((int(n), int(m)) for n, m in self.sizes)
        w_values = tuple(float(w) for w in self.w_values)
        if not sizes or any(n < 1 or m < 1 for n, m in sizes):
            raise InvalidParameterError(f"benchmark sizes must be >= 1x1, got {list(sizes)}")
        if not w_values or any(not w > 0 for w in w_values):
            raise InvalidParameterError(f"benchmark w values must be > 0, got {list(w_values)}")
        if self.repetitions < BENCH_MIN_REPETITIONS:
            raise InvalidParameterError(
                f"repetitions must be >= {BENCH_MIN_REPETITIONS} (median is reported), got {self.repetitions}"
            )
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "w_values", w_values)


@dataclass
class BenchCell:
    rows: int
    cols: int
    w: float
    strategy: Strategy
    seconds: List[float]
    est_memory_bits: float
    max_abs_diff: float
    neglected_term_bound: float
    within_bound: bool
    speedup: Optional[float] = None

    @property
    def median_seconds(self) -> float:
        return statistics.median(self.seconds)

    @property
    def min_seconds(self) -> float:
        return min(self.seconds)

    @property
    def max_seconds(self) -> float:
        return max(self.seconds)

    def to_row(self) -> BenchRow:
        return BenchRow(
            rows=self.rows,
            cols=self.cols,
            w=self.w,
            strategy=self.strategy.value,
            median_seconds=self.median_seconds,
            min_seconds=self.min_seconds,
            max_seconds=self.max_seconds,
            est_memory_bits=self.est_memory_bits,
            max_abs_diff=self.max_abs_diff,
            neglected_term_bound=self.neglected_term_bound,
            within_bound=self.within_bound,
            speedup=self.speedup,
        )


@dataclass
class BenchResult:
    plan: BenchPlan
    cells: List[BenchCell] = field(default_factory=list)
    kernel_construction_seconds: float = 0.0

    @property
    def note(self) -> str:
        return (
            "times include per-run kernel matrix construction and evaluation; "
            f"kernel construction ({self.kernel_construction_seconds:.4f}s) is measured once and excluded; "
            + ("single-threaded" if self.plan.single_threaded else "parallel")
        )

    def cell(self, rows: int, cols: int, w: float, strategy: Union[str, Strategy]) -> BenchCell:
        wanted = Strategy.parse(strategy)
        for c in self.cells:
            if (c.rows, c.cols, c.strategy) == (rows, cols, wanted) and c.w == float(w):
                return c
        raise KeyError(f"no benchmark cell for {rows}x{cols}, w={w:g}, {wanted.value}")

    def speedups(self) -> Dict[Tuple[int, int, float], float]:
        """(rows, cols, w) -> recompute median / precompute median."""
        return {
            (c.rows, c.cols, c.w): c.speedup
            for c in self.cells
            if c.strategy is Strategy.PRECOMPUTE and c.speedup is not None
        }

    def to_report(self) -> BenchReport:
        return BenchReport(
            kernel=self.plan.kernel,
            repetitions=self.plan.repetitions,
            single_threaded=self.plan.single_threaded,
            seed=self.plan.seed,
            kernel_construction_seconds=self.kernel_construction_seconds,
            note=self.note,
            speedups=speedup_summary(self).splitlines(),
            rows=[c.to_row() for c in self.cells],
        )

    def to_dict(self) -> Dict[str, object]:
        return self.to_report().model_dump()


# ===========================================
# Runner
# ===========================================

def bench_image(rows: int, cols: int, seed: int) -> GridImage:
    """Seeded random thermogram with values in the benchmark band."""
    rng = np.random.default_rng([seed, rows, cols])
    low, high = BENCH_VALUE_RANGE
    return GridImage(rng.uniform(low, high, size=(rows, cols)))


def _timed_runs(img: GridImage, cfg: EnhanceConfig, repetitions: int,
                threads: Optional[int]) -> Tuple[List[float], EnhanceResult]:
    # first run is a discarded warm-up
    result = enhance(img, cfg, threads=threads)
    seconds = []
    for _ in range(repetitions):
        result = enhance(img, cfg, threads=threads)
        measured = result.timings["kernel_cache"] + result.timings["evaluate"]
        seconds.append(max(measured, BENCH_TIMING_FLOOR))
    return seconds, result


def run_bench(plan: BenchPlan) -> BenchResult:
    """
    Time both strategies for every (size, w) cell of the plan.

    Each cell is gated on the two strategies agreeing within the truncation
    bound of the precompute run; a failing gate is logged and flagged in
    the row.
    """
    started = time.perf_counter()
    kernel = bivariate_kernel(plan.kernel)
    kernel_seconds = time.perf_counter() - started
    threads = 1 if plan.single_threaded else None
    result = BenchResult(plan=plan, kernel_construction_seconds=kernel_seconds)

    logger.info(
        f"Benchmark {len(plan.sizes)} sizes x {len(plan.w_values)} w values "
        f"[{plan.kernel}, {plan.repetitions} repetitions, "
        f"{'single-threaded' if plan.single_threaded else 'parallel'}]"
    )

    for rows, cols in plan.sizes:
        img = bench_image(rows, cols, plan.seed)
        for w in plan.w_values:
            runs = {}
            for strategy in (Strategy.RECOMPUTE, Strategy.PRECOMPUTE):
                cfg = EnhanceConfig(kernel=kernel, w=w, R=plan.R, strategy=strategy,
                                    truncation_override=plan.truncation_override)
                runs[strategy] = _timed_runs(img, cfg, plan.repetitions, threads)

            slow_seconds, slow = runs[Strategy.RECOMPUTE]
            fast_seconds, fast = runs[Strategy.PRECOMPUTE]
            diff = float(np.max(np.abs(slow.image.values - fast.image.values)))
            bound = fast.neglected_term_bound
            within = diff <= bound + BENCH_AGREEMENT_SLACK
            if not within:
                logger.error(
                    f"Strategies disagree on {rows}x{cols}, w={w:g}: {diff:.3e} > bound {bound:.3e}"
                )
            for strategy, (seconds, run) in runs.items():
                result.cells.append(BenchCell(
                    rows=rows, cols=cols, w=w, strategy=strategy, seconds=seconds,
                    est_memory_bits=run.est_memory_bits, max_abs_diff=diff,
                    neglected_term_bound=bound, within_bound=within,
                ))
            fast_cell = result.cells[-1]
            fast_cell.speedup = statistics.median(slow_seconds) / statistics.median(fast_seconds)
            logger.debug(
                f"{rows}x{cols} w={w:g}: recompute {statistics.median(slow_seconds):.4f}s, "
                f"precompute {statistics.median(fast_seconds):.4f}s (x{fast_cell.speedup:.1f})"
            )

    logger.info(f"Benchmark done in {time.perf_counter() - started:.2f}s")
    return result


# ===========================================
# Output
# ===========================================

def write_bench_csv(result: BenchResult, path: Union[str, Path]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=BENCH_CSV_COLUMNS)
        writer.writeheader()
        for c in result.cells:
            row = c.to_row().model_dump()
            row["speedup"] = "" if row["speedup"] is None else row["speedup"]
            writer.writerow(row)
    return target


def parse_sizes(text: str) -> List[Tuple[int, int]]:
    """``"1,2,10x20"`` -> [(1, 1), (2, 2), (10, 20)]."""
    sizes = []
    for token in (t.strip() for t in text.split(",") if t.strip()):
        try:
            if "x" in token.lower():
                n, m = token.lower().split("x")
                sizes.append((int(n), int(m)))
            else:
                sizes.append((int(token), int(token)))
        except ValueError as exc:
            raise InvalidParameterError(f"invalid size {token!r} (use N or NxM)") from exc
    return sizes


def parse_floats(text: str, name: str = "value") -> List[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise InvalidParameterError(f"invalid {name} list {text!r}") from exc


def format_table(result: BenchResult, strategy: Union[str, Strategy]) -> str:
    """Size-by-w table of median seconds for one strategy."""
    wanted = Strategy.parse(strategy)
    header = "N x M".ljust(10) + "".join(f"w={w:g}".rjust(12) for w in result.plan.w_values)
    lines = [header]
    for rows, cols in result.plan.sizes:
        cells = [result.cell(rows, cols, w, wanted).median_seconds for w in result.plan.w_values]
        lines.append(f"{rows} x {cols}".ljust(10) + "".join(f"{s:12.6f}" for s in cells))
    return "\n".join(lines)


def speedup_summary(result: BenchResult, sizes: Optional[Sequence[Tuple[int, int]]] = None) -> str:
    lines = []
    for (rows, cols, w), ratio in sorted(result.speedups().items()):
        if sizes is None or (rows, cols) in sizes:
            lines.append(f"{rows}x{cols} w={w:g}: precompute x{ratio:.2f} faster")
    return "\n".join(lines)
