"""
Kernel Service

Construction and validation of the kernels used by the sampling Kantorovich
operator: central B-splines M_s, the Fejer kernel F and Jackson-type kernels
J_k, plus their product (tensor) extension to several variables.

Kernel spec strings accepted everywhere (CLI, presets, HTTP):
    bspline:<s>          central B-spline of order s
    jackson:<k>[:alpha]  Jackson-type kernel, alpha defaults to 1
    fejer                Fejer kernel

Author: SK Thermography Team
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Any, Callable, Dict, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import comb, factorial

from ..config import (
    AXIOM_K_RANGE,
    AXIOM_L1_STEP,
    AXIOM_U_STEP,
    DEFAULT_JACKSON_ALPHA,
    KERNEL_SPEC_EXAMPLES,
    QUAD_MAX_NODES,
    QUAD_MIN_HALF_WIDTH,
    QUAD_NODES_PER_UNIT,
    QUAD_RELATIVE_TOLERANCE,
    QUAD_TAIL_TOLERANCE,
    SINC_SERIES_CUTOFF,
)
from ..errors import InvalidParameterError, NumericError
from ..logging_config import get_logger

logger = get_logger(__name__)

ArrayLike = Union[float, np.ndarray, Sequence[float]]


class KernelFamily(str, Enum):
    BSPLINE = "bspline"
    JACKSON = "jackson"
    FEJER = "fejer"


# ===========================================
# Kernel Types
# ===========================================

@dataclass(frozen=True)
class UnivariateKernel:
    """
    Immutable univariate kernel.

    ``function`` maps a float array to a float array of the same shape.
    ``support_radius`` is ``math.inf`` for the band-limited families.
    """

    family: KernelFamily
    order: int
    function: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    alpha: float = 1.0
    support_radius: float = math.inf
    normalization: float = 1.0

    def evaluate(self, x: ArrayLike) -> Union[float, np.ndarray]:
        arr = np.asarray(x, dtype=np.float64)
        out = self.function(arr)
        if arr.ndim == 0:
            return float(out)
        return out

    __call__ = evaluate

    @property
    def is_bounded(self) -> bool:
        return math.isfinite(self.support_radius)

    @property
    def spec(self) -> str:
        if self.family is KernelFamily.BSPLINE:
            return f"bspline:{self.order}"
        if self.family is KernelFamily.JACKSON:
            return f"jackson:{self.order}:{self.alpha:g}"
        return "fejer"


@dataclass(frozen=True)
class MultivariateKernel:
    """Product kernel chi(x_1, ..., x_n) = prod_i factors[i](x_i)."""

    factors: Tuple[UnivariateKernel, ...]

    @property
    def dimension(self) -> int:
        return len(self.factors)

    @property
    def effective_support_radius(self) -> Tuple[float, ...]:
        return tuple(f.support_radius for f in self.factors)

    @property
    def spec(self) -> str:
        specs = [f.spec for f in self.factors]
        if len(set(specs)) == 1:
            return specs[0]
        return "*".join(specs)

    def evaluate(self, *coords: ArrayLike) -> Union[float, np.ndarray]:
        if len(coords) != self.dimension:
            raise InvalidParameterError(
                f"kernel expects {self.dimension} coordinates, got {len(coords)}"
            )
        result: Any = 1.0
        for factor, x in zip(self.factors, coords):
            result = result * factor.evaluate(x)
        return result

    __call__ = evaluate


@dataclass(frozen=True)
class QuadratureSpec:
    """Trapezoid quadrature settings for the Jackson normalization c_k."""

    tail_tolerance: float = QUAD_TAIL_TOLERANCE
    nodes_per_unit: int = QUAD_NODES_PER_UNIT
    min_half_width: float = QUAD_MIN_HALF_WIDTH
    max_nodes: int = QUAD_MAX_NODES
    relative_tolerance: float = QUAD_RELATIVE_TOLERANCE


@dataclass(frozen=True)
class GridSpec:
    """Finite test lattice of the axiom checks."""

    u_step: float = AXIOM_U_STEP
    k_range: int = AXIOM_K_RANGE
    l1_step: float = AXIOM_L1_STEP

    def u_values(self) -> np.ndarray:
        count = int(round(1.0 / self.u_step))
        return np.arange(count, dtype=np.float64) * self.u_step

    def describe(self) -> str:
        return f"u in [0,1) step {self.u_step:g}; k in [-{self.k_range}, {self.k_range}]"


@dataclass(frozen=True)
class KernelAxiomReport:
    summability_estimate: float
    partition_of_unity_max_deviation: float
    moment_beta: float
    moment_estimate: float
    origin_bound: float
    l1_norm_estimate: float
    grid_spec: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "summability_estimate": self.summability_estimate,
            "partition_of_unity_max_deviation": self.partition_of_unity_max_deviation,
            "moment_beta": self.moment_beta,
            "moment_estimate": self.moment_estimate,
            "origin_bound": self.origin_bound,
            "l1_norm_estimate": self.l1_norm_estimate,
            "grid_spec": self.grid_spec,
        }


# ===========================================
# sinc
# ===========================================

def sinc(x: ArrayLike) -> Union[float, np.ndarray]:
    """
    sin(pi x) / (pi x), with sinc(0) = 1.

    Near the origin the Taylor series 1 - (pi x)^2 / 6 is used instead of
    the quotient.
    """
    arr = np.asarray(x, dtype=np.float64)
    px = np.pi * arr
    small = np.abs(px) < SINC_SERIES_CUTOFF
    safe = np.where(small, 1.0, px)
    out = np.where(small, 1.0 - px * px / 6.0, np.sin(safe) / safe)
    if arr.ndim == 0:
        return float(out)
    return out


# ===========================================
# Central B-spline
# ===========================================

def make_bspline(s: int) -> UnivariateKernel:
    """
    Central B-spline of order s.

    M_s(x) = 1/(s-1)! * sum_{i=0..s} (-1)^i C(s, i) (s/2 + x - i)_+^(s-1)

    Evaluated at -|x| (the spline is even) so that only the terms with
    i < s/2 - |x| are non-zero. Order 1 is the unit box, taking the value
    1/2 at +/- 1/2 so integer shifts still sum to one.
    """
    if isinstance(s, bool) or int(s) != s or s < 1:
        raise InvalidParameterError(f"B-spline order must be an integer >= 1, got {s!r}")
    s = int(s)
    half = s / 2.0
    coefficients = np.array([(-1) ** i * comb(s, i, exact=True) for i in range(s + 1)], dtype=np.float64)
    scale = 1.0 / float(factorial(s - 1, exact=True))

    def _box(x: np.ndarray) -> np.ndarray:
        ax = np.abs(x)
        return np.where(ax < 0.5, 1.0, np.where(ax == 0.5, 0.5, 0.0))

    def _spline(x: np.ndarray) -> np.ndarray:
        ax = np.abs(x)
        t = half - ax
        total = np.zeros_like(ax)
        for i, coefficient in enumerate(coefficients):
            total = total + coefficient * np.maximum(t - i, 0.0) ** (s - 1)
        return np.where(ax >= half, 0.0, total * scale)

    return UnivariateKernel(
        family=KernelFamily.BSPLINE,
        order=s,
        function=_box if s == 1 else _spline,
        support_radius=half,
    )


# ===========================================
# Fejer
# ===========================================

def make_fejer() -> UnivariateKernel:
    """F(x) = 1/2 sinc^2(x / 2)."""

    def _fejer(x: np.ndarray) -> np.ndarray:
        return 0.5 * np.asarray(sinc(x / 2.0)) ** 2

    return UnivariateKernel(family=KernelFamily.FEJER, order=0, function=_fejer)


# ===========================================
# Jackson-type
# ===========================================

def _jackson_tail(k: int, half_width: float) -> float:
    """
    Integral of sinc^(2k)(t) over |t| > L for integer L.

    sin^(2k) averages C(2k, k) / 4^k over a period; its oscillating part
    contributes O(L^-(2k+1)) once L is an integer.
    """
    mean = comb(2 * k, k, exact=True) / 4.0 ** k
    return 2.0 * mean / ((2 * k - 1) * math.pi ** (2 * k) * half_width ** (2 * k - 1))


def _jackson_integral(k: int, alpha: float, quad: QuadratureSpec, refine: int) -> Tuple[float, int, float]:
    """
    Trapezoid estimate of the integral of sinc^(2k)(u / (2 k pi alpha)) over R.

    Works in the reduced variable t = u / (2 k pi alpha); sinc^(2k)(t) is
    band-limited to |xi| <= k, so a step of 1/(nodes_per_unit * k) leaves only
    the truncation of the tails as error. The integer half-width L is chosen so
    that 2 / ((2k - 1) pi^(2k) L^(2k-1)) < tail_tolerance, clipped to what
    quad.max_nodes allows at the finest step; the tail beyond L is added in
    closed form.
    """
    tail_width = (2.0 / ((2 * k - 1) * math.pi ** (2 * k) * quad.tail_tolerance)) ** (1.0 / (2 * k - 1))
    finest_step = 1.0 / (quad.nodes_per_unit * k * 2)
    node_width = math.floor((quad.max_nodes - 1) / 2 * finest_step)
    wanted = math.ceil(max(quad.min_half_width, tail_width))
    half_width = float(min(wanted, node_width))
    if refine == 1 and 1 <= half_width < wanted:
        logger.warning(f"jackson:{k} quadrature window clipped to |t| <= {half_width:g} by max_nodes={quad.max_nodes}")
    if half_width < 1:
        raise NumericError(
            f"c_k quadrature for jackson:{k} cannot fit one period in {quad.max_nodes} nodes",
            {"k": k, "alpha": alpha, "max_nodes": quad.max_nodes},
        )
    step = 1.0 / (quad.nodes_per_unit * k * refine)
    nodes = 2 * int(math.ceil(half_width / step)) + 1
    t = np.linspace(-half_width, half_width, nodes)
    scale = 2.0 * k * math.pi * alpha
    value = trapezoid(np.asarray(sinc(t)) ** (2 * k), t * scale) + _jackson_tail(k, half_width) * scale
    return float(value), nodes, half_width


@lru_cache(maxsize=64)
def jackson_normalization(k: int, alpha: float, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """
    Normalization coefficient c_k = 1 / integral of sinc^(2k)(u / (2 k pi alpha)).

    The integral is computed at two resolutions (step h and h/2); they must
    agree within quad.relative_tolerance.
    """
    coarse, nodes, half_width = _jackson_integral(k, alpha, quad, refine=1)
    fine, _, _ = _jackson_integral(k, alpha, quad, refine=2)
    if not (math.isfinite(coarse) and math.isfinite(fine)) or fine <= 0:
        raise NumericError("c_k quadrature produced a non-finite integral", {"k": k, "alpha": alpha})
    relative = abs(coarse - fine) / fine
    if relative > quad.relative_tolerance:
        raise NumericError(
            f"c_k quadrature for jackson:{k} did not converge",
            {"k": k, "alpha": alpha, "coarse": coarse, "fine": fine, "relative_change": relative},
        )
    logger.debug(f"c_{k} (alpha={alpha:g}) = {1.0 / fine:.15g} from {nodes} nodes on [-{half_width:.4g}, {half_width:.4g}]")
    return 1.0 / fine


def make_jackson(k: int, alpha: float = DEFAULT_JACKSON_ALPHA, quad: QuadratureSpec = QuadratureSpec()) -> UnivariateKernel:
    """J_k(x) = c_k sinc^(2k)(x / (2 k pi alpha)), k >= 1, alpha >= 1."""
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise InvalidParameterError(f"Jackson order k must be an integer >= 1, got {k!r}")
    if not math.isfinite(alpha) or alpha < 1:
        raise InvalidParameterError(f"Jackson alpha must be >= 1, got {alpha!r}")
    k = int(k)
    alpha = float(alpha)
    try:
        c_k = jackson_normalization(k, alpha, quad)
    except NumericError:
        logger.warning(f"Refusing jackson:{k}:{alpha:g}, c_k quadrature cannot meet its tolerance")
        raise
    scale = 2.0 * k * math.pi * alpha

    def _jackson(x: np.ndarray) -> np.ndarray:
        return c_k * np.asarray(sinc(x / scale)) ** (2 * k)

    return UnivariateKernel(
        family=KernelFamily.JACKSON,
        order=k,
        function=_jackson,
        alpha=alpha,
        normalization=c_k,
    )


# ===========================================
# Products and Spec Strings
# ===========================================

def product_kernel(factors: Sequence[UnivariateKernel]) -> MultivariateKernel:
    if not factors:
        raise InvalidParameterError("product kernel needs at least one factor")
    return MultivariateKernel(factors=tuple(factors))


def parse_kernel_spec(spec: str) -> UnivariateKernel:
    """Build a univariate kernel from ``bspline:<s>``, ``jackson:<k>[:alpha]`` or ``fejer``."""
    if not isinstance(spec, str) or not spec.strip():
        raise InvalidParameterError(f"empty kernel spec: {spec!r}")
    parts = [p.strip() for p in spec.strip().lower().split(":")]
    name, args = parts[0], parts[1:]
    try:
        if name == KernelFamily.BSPLINE.value and len(args) == 1:
            return make_bspline(_parse_int(args[0]))
        if name == KernelFamily.JACKSON.value and len(args) in (1, 2):
            alpha = float(args[1]) if len(args) == 2 else DEFAULT_JACKSON_ALPHA
            return make_jackson(_parse_int(args[0]), alpha)
        if name == KernelFamily.FEJER.value and not args:
            return make_fejer()
    except ValueError as exc:
        if isinstance(exc, InvalidParameterError):
            raise
        raise InvalidParameterError(f"malformed kernel spec {spec!r}: {exc}") from exc
    raise InvalidParameterError(
        f"unknown kernel spec {spec!r} (e.g. {', '.join(KERNEL_SPEC_EXAMPLES)})"
    )


def _parse_int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise InvalidParameterError(f"expected an integer, got {text!r}")
    return int(value)


def bivariate_kernel(spec: Union[str, UnivariateKernel, MultivariateKernel]) -> MultivariateKernel:
    """Tensor product of a kernel with itself (the image kernel)."""
    if isinstance(spec, MultivariateKernel):
        return spec
    factor = parse_kernel_spec(spec) if isinstance(spec, str) else spec
    return product_kernel([factor, factor])


# ===========================================
# Axiom Checks
# ===========================================

def check_axioms(kern: UnivariateKernel, beta: float = 1.0, grid: GridSpec = GridSpec()) -> KernelAxiomReport:
    """
    Numerical estimates of the kernel conditions on a finite lattice.

    For every u on the grid and k in [-k_range, k_range]:
      - partition of unity: max_u |sum_k kern(u - k) - 1|
      - summability: max_u sum_k |kern(u - k)|
      - discrete absolute moment: max_u sum_k |kern(u - k)| |u - k|^beta
    plus max |kern| on [-1, 1] and a trapezoid estimate of the L1 norm.
    """
    if not beta > 0:
        raise InvalidParameterError(f"moment order beta must be > 0, got {beta!r}")
    u = grid.u_values()
    ks = np.arange(-grid.k_range, grid.k_range + 1, dtype=np.float64)
    diffs = u[:, None] - ks[None, :]
    values = np.asarray(kern.evaluate(diffs))
    magnitudes = np.abs(values)

    pou = float(np.max(np.abs(values.sum(axis=1) - 1.0)))
    summability = float(np.max(magnitudes.sum(axis=1)))
    moment = float(np.max((magnitudes * np.abs(diffs) ** beta).sum(axis=1)))

    origin = float(np.max(np.abs(kern.evaluate(np.linspace(-1.0, 1.0, 2001)))))

    reach = kern.support_radius if kern.is_bounded else float(grid.k_range)
    count = int(math.ceil(2 * reach / grid.l1_step)) + 1
    xs = np.linspace(-reach, reach, count)
    l1 = float(trapezoid(np.abs(kern.evaluate(xs)), xs))

    return KernelAxiomReport(
        summability_estimate=summability,
        partition_of_unity_max_deviation=pou,
        moment_beta=float(beta),
        moment_estimate=moment,
        origin_bound=origin,
        l1_norm_estimate=l1,
        grid_spec=grid.describe(),
    )
