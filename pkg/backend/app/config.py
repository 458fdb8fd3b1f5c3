"""
Sampling Kantorovich Thermography Toolkit - Configuration

This module contains all configuration settings, numerical constants,
named enhancement presets and environment variable handling for the
toolkit (library, batch CLI and HTTP service).

Environment variables use the ``SK_`` prefix (``SK_THREADS``,
``SK_DEBUG``, ``SK_LOG_FILE``, ``SK_OUTPUT_DIR``, ``SK_CSV_DIGITS``) and
may also be placed in a ``.env`` file.
"""

from typing import Any, Dict, List, Tuple

from dotenv import load_dotenv
from pydantic_settings import BaseSettings

# Load environment variables from .env file
load_dotenv()


class Settings(BaseSettings):
    """
    Toolkit settings loaded from environment variables.

    Attributes:
        threads: Worker cap for the enhance stage (0 = every available core)
        debug: Debug mode flag (DEBUG console logging)
        log_file: Path of the rotating log file; empty disables file logging
        output_dir: Default output directory of pipeline runs
        csv_digits: Significant digits written to CSV matrices
    """

    threads: int = 0
    debug: bool = False
    log_file: str = ""
    output_dir: str = "runs"
    csv_digits: int = 9

    class Config:
        env_prefix = "SK_"
        env_file = ".env"
        extra = "ignore"


# ===========================================
# Kernel Configuration
# ===========================================

# Jackson-type kernels default to alpha = 1 (the kernel plots use it)
DEFAULT_JACKSON_ALPHA: float = 1.0

# sinc switches to its Taylor series when |pi * x| falls below this value
SINC_SERIES_CUTOFF: float = 1e-4

# Accepted kernel spec strings: bspline:<s>, jackson:<k>[:alpha], fejer
KERNEL_SPEC_EXAMPLES: List[str] = ["bspline:3", "jackson:12", "jackson:2:1.5", "fejer"]


# ===========================================
# Quadrature Configuration (Jackson c_k)
# ===========================================

# Upper bound on the neglected tail of the c_k integral
QUAD_TAIL_TOLERANCE: float = 1e-10

# Trapezoid nodes per unit of the reduced variable t = u / (2 k pi alpha),
# scaled by k so the step stays below the band limit of sinc^(2k)
QUAD_NODES_PER_UNIT: int = 4

# Smallest half-width (reduced variable) integrated, whatever the tail bound says
QUAD_MIN_HALF_WIDTH: float = 8.0

# Node cap at the finest step; past it the integration window is clipped
# and the remaining tail is added in closed form
QUAD_MAX_NODES: int = 4_000_000

# Relative agreement required between step h and step h/2
QUAD_RELATIVE_TOLERANCE: float = 1e-9


# ===========================================
# Kernel Axiom Check Configuration
# ===========================================

# u-grid {0, 0.01, ..., 0.99}
AXIOM_U_STEP: float = 0.01

# k-sum truncation range (+/-) for the discrete sums
AXIOM_K_RANGE: int = 200

# Step of the L1-norm trapezoid estimate
AXIOM_L1_STEP: float = 0.01


# ===========================================
# Enhancement Engine Configuration
# ===========================================

# Hard evaluation radius (lattice steps per axis) for unbounded kernels
DEFAULT_EVALUATION_RADIUS: float = 40.0

# Measurement resolution P of thermal data (degrees Celsius)
DEFAULT_MEASUREMENT_RESOLUTION: float = 1e-2

# Neglected contribution allowed per output value, as a fraction of P
TRUNCATION_RESOLUTION_FACTOR: float = 0.4

# Bits per stored kernel value in the memory estimates
DEFAULT_VALUE_BITS: int = 64

# Output rows evaluated per work unit (fixed so results do not depend on
# the number of threads)
ROW_BLOCK_SIZE: int = 32

# Fractional offsets closer than 10^-12 share a cached kernel matrix
OFFSET_CLASS_DECIMALS: int = 12

# Truncated windows whose weight sum falls below this cannot be renormalized
WINDOW_SUM_FLOOR: float = 1e-12


# ===========================================
# Enhancement Presets
# ===========================================

PRESETS: Dict[str, Dict[str, Any]] = {
    # Jackson J12, w = 15, R = 2, terms below 10^-4 neglected
    "paper-thermo": {
        "kernel": "jackson:12:1",
        "w": 15.0,
        "R": 2.0,
        "strategy": "precompute",
        "truncation_override": 1e-4,
    },
    "bspline-fast": {
        "kernel": "bspline:3",
        "w": 5.0,
        "R": 2.0,
        "strategy": "precompute",
        "truncation_override": None,
    },
    "fejer-smooth": {
        "kernel": "fejer",
        "w": 5.0,
        "R": 2.0,
        "strategy": "precompute",
        "truncation_override": None,
    },
}

DEFAULT_PRESET: str = "paper-thermo"


# ===========================================
# Segmentation Configuration
# ===========================================

DEFAULT_BINS: int = 256
DEFAULT_SMOOTH_WINDOW: int = 5

# Histograms with fewer bins are accepted but logged
RECOMMENDED_MIN_BINS: int = 8
MIN_BINS: int = 2

# Valley refinement on raw counts: +/- bins around the smoothed valley
VALLEY_REFINE_BINS: int = 2

# A valley whose count exceeds this fraction of the lower peak is not
# considered a real separation between two modes
VALLEY_DEPTH_LIMIT: float = 0.5

# Re-binning sequence tried by the pipeline when the valley is not significant
REBIN_SEQUENCE: Tuple[int, ...] = (256, 128, 64, 32)

# Thermal bridges appear colder on inner walls in winter conditions
DEFAULT_BRIDGE_IS_COLD: bool = True


# ===========================================
# Energy Index Configuration
# ===========================================

# Reported improvements that differ from recomputed ones by more than this
# (fraction, i.e. 0.5 percentage points) are flagged in comparisons
IMPROVEMENT_DISCREPANCY_LIMIT: float = 0.005

# Documented reference values of the two hot-box bridges (not reproducible
# without the original thermograms)
PAPER_THRESHOLDS_C: Dict[str, float] = {
    "pillar": 21.50,
    "beam_pillar_joint": 20.36,
}

PAPER_ITB: Dict[str, Dict[str, float]] = {
    "pillar": {"raw": 1.611, "enhanced": 1.585, "reference": 1.439},
    "beam_pillar_joint": {"raw": 1.467, "enhanced": 1.462, "reference": 1.303},
}

# Improvements as stated alongside the values above
PAPER_REPORTED_IMPROVEMENT: Dict[str, float] = {
    "pillar": 0.15,
    "beam_pillar_joint": 0.04,
}


# ===========================================
# Phantom Configuration
# ===========================================

PHANTOM_MIN_SIZE: int = 32
PHANTOM_DEFAULT_SIZE: Tuple[int, int] = (128, 128)
PHANTOM_BRIDGE_TEMPERATURE: float = 20.0
PHANTOM_FIELD_TEMPERATURE: float = 23.0
PHANTOM_NOISE_SIGMA: float = 0.2


# ===========================================
# Benchmark Configuration
# ===========================================

BENCH_MIN_REPETITIONS: int = 3
BENCH_DEFAULT_SIZES: List[Tuple[int, int]] = [(1, 1), (2, 2), (3, 3), (5, 5), (10, 10)]
BENCH_DEFAULT_W: List[float] = [1.0, 4.0, 9.0, 25.0, 100.0, 400.0]
BENCH_DEFAULT_KERNEL: str = "jackson:2"
BENCH_DEFAULT_SEED: int = 2017
BENCH_DEFAULT_R: float = 1.0
BENCH_TIMING_FLOOR: float = 1e-9
BENCH_AGREEMENT_SLACK: float = 1e-10

# Random benchmark images are drawn uniformly in this temperature band
BENCH_VALUE_RANGE: Tuple[float, float] = (15.0, 25.0)


# ===========================================
# I/O Configuration
# ===========================================

CSV_DELIMITER: str = ","
PGM_SCALE_SUFFIX: str = ".scale.json"
PGM_MAX_GRAY_16: int = 65535
MASK_BRIDGE_GRAY: int = 255
MASK_EXTERNAL_GRAY: int = 0

# Files written by a pipeline run
RUN_REPORT_FILE: str = "run_report.json"
RUN_CONFIG_FILE: str = "pipeline_config.json"
MASK_FILE: str = "mask.pgm"
CONTOURS_FILE: str = "contours.csv"
ENHANCED_STEM: str = "enhanced"


# ===========================================
# Exit Codes
# ===========================================

EXIT_OK: int = 0
EXIT_INVALID_INPUT: int = 2
EXIT_NUMERIC_FAILURE: int = 3


# ===========================================
# Singleton Settings Instance
# ===========================================

settings = Settings()


def get_settings() -> Settings:
    """
    Get the toolkit settings instance.

    Returns:
        Settings: The global settings instance
    """
    return settings
