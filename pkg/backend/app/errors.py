"""
Sampling Kantorovich Thermography Toolkit - Error Types

Every failure raised by the services derives from SKError, which carries a
machine-readable ``error_code`` (echoed by the HTTP layer in ErrorResponse)
and the process ``exit_code`` used by the CLI.

Author: SK Thermography Team
"""

from typing import Any, Dict, Optional

from app.config import EXIT_INVALID_INPUT, EXIT_NUMERIC_FAILURE


class SKError(Exception):
    """Base class of all toolkit errors."""

    error_code: str = "sk_error"
    exit_code: int = EXIT_INVALID_INPUT

    def __init__(self, message: str, diagnostic: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.diagnostic: Dict[str, Any] = dict(diagnostic or {})

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"error_code": self.error_code, "detail": self.message}
        if self.diagnostic:
            payload["diagnostic"] = self.diagnostic
        return payload


# ===========================================
# Invalid input (exit code 2)
# ===========================================

class InvalidParameterError(SKError, ValueError):
    """A parameter or input violates a precondition."""

    error_code = "invalid_parameter"
    exit_code = EXIT_INVALID_INPUT


class DegenerateHistogramError(InvalidParameterError):
    """Histogram of constant data (max == min)."""

    error_code = "degenerate_histogram"


# ===========================================
# Numeric failures (exit code 3)
# ===========================================

class NumericError(SKError, ArithmeticError):
    """A computation failed to converge or produced non-finite values."""

    error_code = "numeric_error"
    exit_code = EXIT_NUMERIC_FAILURE


class UnimodalDataError(NumericError):
    """Fewer than two relative maxima in the smoothed histogram."""

    error_code = "unimodal_data"


class ItbDivisionError(NumericError):
    """I_tb undefined because T_i equals T_1D."""

    error_code = "itb_division_by_zero"


# ===========================================
# Pipeline stage failures
# ===========================================

class StageError(SKError):
    """
    Failure of one pipeline stage.

    Wraps the original exception; the exit code follows the wrapped error
    (I/O errors count as invalid input).
    """

    error_code = "stage_failed"

    def __init__(self, stage: str, cause: BaseException):
        message = f"stage '{stage}' failed: {cause}"
        diagnostic: Dict[str, Any] = {"stage": stage, "cause": type(cause).__name__}
        if isinstance(cause, SKError):
            diagnostic["cause_error_code"] = cause.error_code
        super().__init__(message, diagnostic)
        self.stage = stage
        self.cause = cause
        if isinstance(cause, SKError):
            self.exit_code = cause.exit_code
        else:
            self.exit_code = EXIT_INVALID_INPUT
