"""
Sampling Kantorovich Enhancement Engine

Evaluates the bivariate operator

    (S_w I)(x) = sum_k chi(w x - k) * [w^2 * integral of I over R_k^w]

on the pixel-center output grid of an image enlarged by the factor R.

Two evaluation strategies:
- RECOMPUTE: for every output point the kernel matrix over the whole cell
  table is evaluated from scratch (memory ~ N*M*w^2*B, cost grows with w^2).
- PRECOMPUTE: output points are grouped by the fractional part of w*x on each
  axis; one kernel weight matrix is built per offset class, entries below the
  truncation threshold k_bar are zeroed, and the matrix is reused for every
  point of the class (memory ~ N*M*w^2*R^2*B by the closed-form estimate).

Unbounded kernels are evaluated on a finite window of
``kernel_truncation_radius`` lattice steps per axis; each axis window is
renormalized to sum 1 so that constants are reproduced exactly.

Author: SK Thermography Team
"""

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from threading import Lock
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, cpu_count, delayed

from ..config import (
    DEFAULT_EVALUATION_RADIUS,
    DEFAULT_VALUE_BITS,
    OFFSET_CLASS_DECIMALS,
    PRESETS,
    ROW_BLOCK_SIZE,
    TRUNCATION_RESOLUTION_FACTOR,
    WINDOW_SUM_FLOOR,
    get_settings,
)
from ..errors import InvalidParameterError, NumericError
from ..logging_config import get_logger
from .kernel_service import (
    MultivariateKernel,
    UnivariateKernel,
    bivariate_kernel,
    check_axioms,
    parse_kernel_spec,
)
from .signal_service import (
    BoundaryPolicy,
    GridImage,
    axis_coords,
    cell_means,
    cell_means_1d,
    output_grid,
)

logger = get_logger(__name__)

# Above this many (row class, column class) pairs the kernel matrices are
# rebuilt per block instead of being kept
MAX_CACHED_CLASS_PAIRS = 1024


class Strategy(str, Enum):
    RECOMPUTE = "recompute"
    PRECOMPUTE = "precompute"

    @classmethod
    def parse(cls, value: Union[str, "Strategy"]) -> "Strategy":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        aliases = {"1": cls.RECOMPUTE, "2": cls.PRECOMPUTE, "precompute-truncate": cls.PRECOMPUTE}
        if text in aliases:
            return aliases[text]
        try:
            return cls(text)
        except ValueError as exc:
            raise InvalidParameterError(f"unknown strategy {value!r} (recompute | precompute)") from exc


# ===========================================
# Configuration and Result Types
# ===========================================

@dataclass(frozen=True)
class EnhanceConfig:
    kernel: MultivariateKernel
    w: float
    R: float = 1.0
    strategy: Strategy = Strategy.PRECOMPUTE
    truncation_override: Optional[float] = None
    kernel_truncation_radius: float = DEFAULT_EVALUATION_RADIUS
    boundary: BoundaryPolicy = BoundaryPolicy.REPLICATE
    normalize_window: bool = True

    def __post_init__(self):
        if isinstance(self.kernel, (str, UnivariateKernel)):
            object.__setattr__(self, "kernel", bivariate_kernel(self.kernel))
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        object.__setattr__(self, "boundary", BoundaryPolicy.parse(self.boundary))
        if not (math.isfinite(self.w) and self.w > 0):
            raise InvalidParameterError(f"w must be > 0, got {self.w!r}")
        if not (math.isfinite(self.R) and self.R >= 1):
            raise InvalidParameterError(f"R must be >= 1, got {self.R!r}")
        if self.truncation_override is not None and not (
            math.isfinite(self.truncation_override) and self.truncation_override >= 0
        ):
            raise InvalidParameterError(f"truncation_override must be >= 0, got {self.truncation_override!r}")
        if not (self.kernel_truncation_radius > 0):
            raise InvalidParameterError(
                f"kernel_truncation_radius must be > 0, got {self.kernel_truncation_radius!r}"
            )

    @property
    def kernel_spec(self) -> str:
        return self.kernel.spec


@dataclass
class EnhanceResult:
    image: GridImage
    applied_truncation: float
    neglected_term_bound: float
    strategy_used: Strategy
    timing: float
    est_memory_bits: float
    formula_truncation: float = 0.0
    agreement_bound: float = 0.0
    offset_classes: Tuple[int, int] = (0, 0)
    timings: Dict[str, float] = field(default_factory=dict)
    kernel_spec: str = ""
    w: float = 0.0
    R: float = 1.0
    threads: int = 1
    input_shape: Tuple[int, int] = (0, 0)

    def to_report(self) -> Dict[str, Any]:
        return {
            "kernel": self.kernel_spec,
            "w": self.w,
            "R": self.R,
            "strategy": self.strategy_used.value,
            "input_shape": list(self.input_shape),
            "output_shape": list(self.image.shape),
            "k_bar": self.applied_truncation,
            "k_bar_formula": self.formula_truncation,
            "neglected_term_bound": self.neglected_term_bound,
            "agreement_bound": self.agreement_bound,
            "offset_classes": list(self.offset_classes),
            "elapsed_seconds": self.timing,
            "timings": dict(self.timings),
            "est_memory_bits": self.est_memory_bits,
            "threads": self.threads,
        }


def config_from_preset(name: str, **overrides: Any) -> EnhanceConfig:
    """EnhanceConfig from a named preset; ``None`` overrides are ignored."""
    if name not in PRESETS:
        raise InvalidParameterError(f"unknown preset {name!r} (available: {', '.join(sorted(PRESETS))})")
    values = dict(PRESETS[name])
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    return EnhanceConfig(
        kernel=bivariate_kernel(values.pop("kernel")),
        w=float(values.pop("w")),
        R=float(values.pop("R")),
        **values,
    )


# ===========================================
# Closed-form Quantities
# ===========================================

def truncation_terms(img: GridImage, w: float, window_terms: int = 0) -> float:
    """Number of kernel terms one output pixel can lose: max(w^2 * N * M, window_terms)."""
    return max(w * w * img.rows * img.cols, float(window_terms))


def truncation_threshold(img: GridImage, w: float, window_terms: int = 0) -> float:
    """
    k_bar = 0.4 * P / (terms * A); 0 (no truncation) when A <= 0.

    ``terms`` is w^2 * N * M, or the evaluated window size when that is larger,
    so that the zeroed weights of one pixel never sum past 0.4 * P / A.
    A is the largest absolute pixel value.
    """
    if not (math.isfinite(w) and w > 0):
        raise InvalidParameterError(f"w must be > 0, got {w!r}")
    if img.max_value <= 0:
        return 0.0
    peak = max(img.max_value, abs(img.min_value))
    return TRUNCATION_RESOLUTION_FACTOR * img.resolution / (truncation_terms(img, w, window_terms) * peak)


def memory_estimate(img: GridImage, cfg: EnhanceConfig, B: int = DEFAULT_VALUE_BITS) -> Tuple[float, float]:
    """(N*M*w^2*B, N*M*w^2*R^2*B) bits for the recompute and precompute strategies."""
    if not B > 0:
        raise InvalidParameterError(f"bits per value must be > 0, got {B!r}")
    base = float(img.rows) * img.cols * cfg.w * cfg.w * B
    return base, base * cfg.R * cfg.R


def resolve_threads(threads: Optional[int] = None) -> int:
    """Explicit argument, else SK_THREADS; 0 means every available core."""
    if threads is None:
        threads = get_settings().threads
    if threads <= 0:
        threads = cpu_count()
    return max(1, int(threads))


# ===========================================
# Axis Planning
# ===========================================

@dataclass(frozen=True, eq=False)
class _AxisPlan:
    t: np.ndarray          # w * x per output coordinate
    base: np.ndarray       # floor(t)
    frac: np.ndarray       # t - base, in [0, 1)
    radius: float
    offsets: np.ndarray    # window offsets -reach .. reach + 1
    k_lo: int
    k_hi: int
    renormalize: bool


def _plan_axis(coords: np.ndarray, w: float, factor: UnivariateKernel, cfg_radius: float,
               normalize: bool) -> _AxisPlan:
    t = w * coords
    base = np.floor(t).astype(np.int64)
    radius = min(factor.support_radius, cfg_radius)
    reach = int(math.ceil(radius))
    return _AxisPlan(
        t=t,
        base=base,
        frac=t - base,
        radius=radius,
        offsets=np.arange(-reach, reach + 2, dtype=np.int64),
        k_lo=int(base.min()) - reach,
        k_hi=int(base.max()) + reach + 2,
        renormalize=normalize and radius < factor.support_radius,
    )


def _window_weights(factor: UnivariateKernel, args: np.ndarray, radius: float, renormalize: bool) -> np.ndarray:
    """Kernel values at ``args`` (last axis = window), zero beyond ``radius``."""
    values = np.where(np.abs(args) <= radius, factor.evaluate(args), 0.0)
    if renormalize:
        sums = values.sum(axis=-1, keepdims=True)
        if np.any(np.abs(sums) < WINDOW_SUM_FLOOR):
            raise NumericError(
                f"kernel window of {factor.spec} sums to ~0 and cannot be renormalized",
                {"radius": radius, "min_sum": float(np.min(np.abs(sums)))},
            )
        values = values / sums
    return values


def _offset_classes(frac: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(labels per coordinate, representative fractional offset per class)."""
    keys = np.round(frac, OFFSET_CLASS_DECIMALS)
    _, first, labels = np.unique(keys, return_index=True, return_inverse=True)
    return labels.reshape(-1), frac[first]


# ===========================================
# Kernel Matrix Cache (PRECOMPUTE)
# ===========================================

@dataclass(frozen=True, eq=False)
class _TruncatedMatrix:
    """Kernel weight matrix of one offset class, stored by non-zero row."""

    rows: Tuple[Tuple[int, np.ndarray, np.ndarray], ...]
    zeroed_mass: float
    kept: int


class _KernelMatrixCache:
    def __init__(self, wx: np.ndarray, wy: np.ndarray, k_bar: float, store: bool):
        self._wx = wx
        self._wy = wy
        self._k_bar = k_bar
        self._store = store
        self._entries: Dict[Tuple[int, int], _TruncatedMatrix] = {}
        self._lock = Lock()
        self.max_zeroed_mass = 0.0

    def build(self, cx: int, cy: int) -> _TruncatedMatrix:
        weights = np.outer(self._wx[cx], self._wy[cy])
        keep = (weights != 0.0) & (np.abs(weights) >= self._k_bar)
        zeroed = float(np.abs(weights[~keep]).sum())
        rows = []
        for a in range(weights.shape[0]):
            cols = np.flatnonzero(keep[a])
            if cols.size:
                rows.append((a, cols, weights[a, cols]))
        return _TruncatedMatrix(rows=tuple(rows), zeroed_mass=zeroed, kept=int(keep.sum()))

    def get(self, cx: int, cy: int) -> _TruncatedMatrix:
        key = (cx, cy)
        entry = self._entries.get(key)
        if entry is not None:
            return entry
        entry = self.build(cx, cy)
        with self._lock:
            self.max_zeroed_mass = max(self.max_zeroed_mass, entry.zeroed_mass)
            if self._store:
                self._entries[key] = entry
        return entry

    def warm(self) -> None:
        for cx in range(self._wx.shape[0]):
            for cy in range(self._wy.shape[0]):
                entry = self.get(cx, cy)
                logger.debug(
                    f"kernel matrix class ({cx}, {cy}): {entry.kept} kept, zeroed mass {entry.zeroed_mass:.3e}"
                )


# ===========================================
# Enhancement
# ===========================================

def _row_blocks(total: int) -> List[Tuple[int, int]]:
    return [(start, min(start + ROW_BLOCK_SIZE, total)) for start in range(0, total, ROW_BLOCK_SIZE)]


def enhance(img: GridImage, cfg: EnhanceConfig, threads: Optional[int] = None) -> EnhanceResult:
    """
    Evaluate the operator on the (round(n R) x round(m R)) output grid.

    Raises:
        InvalidParameterError: kernel is not bivariate
        NumericError: non-finite output value (the 1-based pixel is named)
    """
    if cfg.kernel.dimension != 2:
        raise InvalidParameterError(f"image enhancement needs a bivariate kernel, got dimension {cfg.kernel.dimension}")
    n_jobs = resolve_threads(threads)
    fx, fy = cfg.kernel.factors
    grid = output_grid(img.rows, img.cols, cfg.R)
    rplan = _plan_axis(grid.row_coords, cfg.w, fx, cfg.kernel_truncation_radius, cfg.normalize_window)
    cplan = _plan_axis(grid.col_coords, cfg.w, fy, cfg.kernel_truncation_radius, cfg.normalize_window)
    out_rows, out_cols = grid.shape
    window_terms = int(rplan.offsets.size * cplan.offsets.size)
    formula_k_bar = truncation_threshold(img, cfg.w, window_terms)

    logger.info(
        f"Enhance {img.rows}x{img.cols} -> {out_rows}x{out_cols} "
        f"[{cfg.kernel_spec}, w={cfg.w:g}, R={cfg.R:g}, {cfg.strategy.value}, threads={n_jobs}]"
    )

    started = time.perf_counter()
    # offsets end at reach + 1, so reach + 2 cells of margin cover every window
    margin = int(max(rplan.offsets[-1], cplan.offsets[-1])) + 1
    table = cell_means(img, cfg.w, cfg.boundary, margin=margin)
    means = table.block((rplan.k_lo, rplan.k_hi), (cplan.k_lo, cplan.k_hi))
    table_done = time.perf_counter()

    if cfg.strategy is Strategy.RECOMPUTE:
        k_bar = 0.0
        cache = None
        classes = (0, 0)
        k_rows = np.arange(rplan.k_lo, rplan.k_hi, dtype=np.float64)
        k_cols = np.arange(cplan.k_lo, cplan.k_hi, dtype=np.float64)

        def evaluate_block(r0: int, r1: int) -> np.ndarray:
            block = np.empty((r1 - r0, out_cols))
            for i in range(r0, r1):
                for j in range(out_cols):
                    kx = _window_weights(fx, rplan.t[i] - k_rows, rplan.radius, rplan.renormalize)
                    ky = _window_weights(fy, cplan.t[j] - k_cols, cplan.radius, cplan.renormalize)
                    block[i - r0, j] = np.vdot(np.outer(kx, ky), means)
            return block

        cache_done = time.perf_counter()
    else:
        k_bar = cfg.truncation_override if cfg.truncation_override is not None else formula_k_bar
        row_labels, row_reps = _offset_classes(rplan.frac)
        col_labels, col_reps = _offset_classes(cplan.frac)
        classes = (int(row_reps.size), int(col_reps.size))
        wx = _window_weights(fx, row_reps[:, None] - rplan.offsets[None, :], rplan.radius, rplan.renormalize)
        wy = _window_weights(fy, col_reps[:, None] - cplan.offsets[None, :], cplan.radius, cplan.renormalize)
        store = classes[0] * classes[1] <= MAX_CACHED_CLASS_PAIRS
        if not store:
            logger.warning(
                f"{classes[0]}x{classes[1]} offset classes; kernel matrices are rebuilt per block"
            )
        cache = _KernelMatrixCache(wx, wy, k_bar, store)
        if store:
            cache.warm()
        cache_done = time.perf_counter()

        row_base = rplan.base - rplan.k_lo
        col_base = cplan.base - cplan.k_lo
        col_members = [np.flatnonzero(col_labels == cy) for cy in range(classes[1])]

        def evaluate_block(r0: int, r1: int) -> np.ndarray:
            block = np.empty((r1 - r0, out_cols))
            rows = np.arange(r0, r1)
            for cx in np.unique(row_labels[rows]):
                sel_r = rows[row_labels[rows] == cx]
                base_r = row_base[sel_r]
                for cy, sel_c in enumerate(col_members):
                    base_c = col_base[sel_c]
                    entry = cache.get(int(cx), cy)
                    acc = np.zeros((sel_r.size, sel_c.size))
                    for a, cols, vals in entry.rows:
                        sub = means[base_r + rplan.offsets[a]]
                        gathered = sub[:, base_c[:, None] + cplan.offsets[cols][None, :]]
                        acc += gathered @ vals
                    block[np.ix_(sel_r - r0, sel_c)] = acc
            return block

    blocks = _row_blocks(out_rows)
    pieces = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(evaluate_block)(r0, r1) for r0, r1 in blocks)
    values = np.vstack(pieces) if pieces else np.empty((0, out_cols))
    finished = time.perf_counter()

    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise NumericError(
            f"non-finite output at pixel ({bad[0] + 1}, {bad[1] + 1})",
            {"row": int(bad[0] + 1), "col": int(bad[1] + 1), "kernel": cfg.kernel_spec},
        )

    max_mean = float(np.max(np.abs(means))) if means.size else 0.0
    neglected = cache.max_zeroed_mass * max_mean if cache is not None else 0.0
    approach1_bits, approach2_bits = memory_estimate(img, cfg)
    peak = max(abs(img.max_value), abs(img.min_value))
    agreement = truncation_terms(img, cfg.w, window_terms) * k_bar * peak
    timings = {
        "cell_means": table_done - started,
        "kernel_cache": cache_done - table_done,
        "evaluate": finished - cache_done,
    }
    elapsed = finished - started

    logger.info(
        f"Enhance done in {elapsed:.3f}s (k_bar={k_bar:.3e}, neglected<={neglected:.3e}, classes={classes})"
    )

    return EnhanceResult(
        image=img.with_values(values),
        applied_truncation=float(k_bar),
        neglected_term_bound=float(neglected),
        strategy_used=cfg.strategy,
        timing=elapsed,
        est_memory_bits=approach1_bits if cfg.strategy is Strategy.RECOMPUTE else approach2_bits,
        formula_truncation=formula_k_bar,
        agreement_bound=float(agreement),
        offset_classes=classes,
        timings=timings,
        kernel_spec=cfg.kernel_spec,
        w=cfg.w,
        R=cfg.R,
        threads=n_jobs,
        input_shape=img.shape,
    )


# ===========================================
# 1-D Operator and Error Norms
# ===========================================

def enhance_signal_1d(
    samples: Sequence[float],
    kernel: Union[str, UnivariateKernel],
    w: float,
    R: float = 1.0,
    radius: float = DEFAULT_EVALUATION_RADIUS,
    boundary: Union[str, BoundaryPolicy] = BoundaryPolicy.REPLICATE,
    normalize_window: bool = True,
) -> np.ndarray:
    """Univariate operator on a step signal, evaluated at the pixel centers (i - 0.5) / R."""
    values = np.asarray(samples, dtype=np.float64).reshape(-1)
    if values.size < 1 or not np.all(np.isfinite(values)):
        raise InvalidParameterError("signal must be a non-empty sequence of finite values")
    if not (math.isfinite(w) and w > 0):
        raise InvalidParameterError(f"w must be > 0, got {w!r}")
    if not (math.isfinite(R) and R >= 1):
        raise InvalidParameterError(f"R must be >= 1, got {R!r}")
    factor = parse_kernel_spec(kernel) if isinstance(kernel, str) else kernel
    plan = _plan_axis(axis_coords(values.size, R), w, factor, radius, normalize_window)
    means = cell_means_1d(values, w, plan.k_lo, plan.k_hi, boundary)
    weights = _window_weights(factor, plan.frac[:, None] - plan.offsets[None, :], plan.radius, plan.renormalize)
    index = (plan.base - plan.k_lo)[:, None] + plan.offsets[None, :]
    return (weights * means[index]).sum(axis=1)


def approximation_errors(approx: np.ndarray, truth: np.ndarray) -> Dict[str, float]:
    """Discrete L1 (mean absolute), L2 (root mean square) and sup errors."""
    a = np.asarray(approx, dtype=np.float64)
    b = np.asarray(truth, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidParameterError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    return {
        "l1": float(diff.mean()),
        "l2": float(np.sqrt(np.mean(diff * diff))),
        "sup": float(diff.max()),
    }


def kernel_check(spec: str, beta: float = 1.0, w: float = 5.0, samples: int = 32) -> Dict[str, Any]:
    """
    Axiom estimates of a univariate kernel plus the constant-reproduction
    error of the 1-D operator on a constant signal.
    """
    factor = parse_kernel_spec(spec)
    report = check_axioms(factor, beta=beta)
    reproduced = enhance_signal_1d(np.ones(samples), factor, w)
    return {
        "kernel": factor.spec,
        "normalization": factor.normalization,
        "support_radius": factor.support_radius if factor.is_bounded else None,
        **report.to_dict(),
        "constant_reproduction_1d": float(np.max(np.abs(reproduced - 1.0))),
    }
