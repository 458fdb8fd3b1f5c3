"""
Image I/O Service

Matrix formats shared by the CLI, the pipeline and the HTTP layer:
- CSV: one image row per line, comma separated, 9 significant digits
- PGM 16-bit (Pillow) with a JSON sidecar ``<file>.scale.json`` holding the
  affine map gray -> temperature (offset + slope * gray); 8-bit and plain P2 are read too
- Masks: 8-bit P5, 0 = A_E, 255 = A_B
- Reports: JSON

Author: SK Thermography Team
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..config import (
    CSV_DELIMITER,
    DEFAULT_MEASUREMENT_RESOLUTION,
    MASK_BRIDGE_GRAY,
    MASK_EXTERNAL_GRAY,
    PGM_MAX_GRAY_16,
    PGM_SCALE_SUFFIX,
    get_settings,
)
from ..errors import InvalidParameterError
from ..logging_config import get_logger
from .signal_service import GridImage, Unit

logger = get_logger(__name__)

PathLike = Union[str, Path]


def image_format(path: PathLike, explicit: Optional[str] = None) -> str:
    fmt = (explicit or Path(path).suffix.lstrip(".")).lower()
    if fmt not in ("csv", "pgm"):
        raise InvalidParameterError(f"unsupported image format {fmt!r} for {path} (csv | pgm)")
    return fmt


# ===========================================
# PGM
# ===========================================

_GRAY_MODES = ("L", "I", "I;16", "I;16B")


def read_pgm(path: PathLike) -> np.ndarray:
    """Raw gray levels of a PGM (binary P5 or plain P2), 8 or 16 bit."""
    try:
        with Image.open(path) as picture:
            picture.load()
            kind, mode = picture.format, picture.mode
            gray = np.array(picture)
    except FileNotFoundError:
        raise
    except UnidentifiedImageError as exc:
        raise InvalidParameterError(f"{path} is not a PGM image") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise InvalidParameterError(f"{path}: unreadable or truncated PGM ({exc})") from exc
    if kind != "PPM" or mode not in _GRAY_MODES:
        raise InvalidParameterError(f"{path} is not a grayscale PGM (format {kind}, mode {mode})")
    return gray.astype(np.int64)


def write_pgm(gray: np.ndarray, path: PathLike, maxval: int) -> Path:
    """Binary PGM: 8 bit for maxval <= 255, else 16 bit (maxval 65535)."""
    dtype = np.uint16 if maxval > 255 else np.uint8
    target = Path(path)
    Image.fromarray(np.clip(np.asarray(gray), 0, maxval).astype(dtype)).save(target, format="PPM")
    return target


def _scale_path(path: PathLike) -> Path:
    return Path(str(path) + PGM_SCALE_SUFFIX)


def read_scale(path: PathLike) -> Optional[Dict[str, float]]:
    sidecar = _scale_path(path)
    if not sidecar.exists():
        return None
    scale = json.loads(sidecar.read_text())
    try:
        return {"offset": float(scale["offset"]), "slope": float(scale["slope"])}
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidParameterError(f"{sidecar}: scale needs numeric 'offset' and 'slope'") from exc


# ===========================================
# Images
# ===========================================

def read_image(path: PathLike, fmt: Optional[str] = None,
               resolution: float = DEFAULT_MEASUREMENT_RESOLUTION) -> GridImage:
    """
    Load a CSV or PGM matrix. PGM gray levels are mapped to temperatures
    through the sidecar scale; without one the image stays in gray levels.
    """
    source = Path(path)
    if not source.exists():
        raise FileNotFoundError(f"input image not found: {source}")
    kind = image_format(source, fmt)
    if kind == "csv":
        try:
            values = np.loadtxt(source, delimiter=CSV_DELIMITER, ndmin=2, dtype=np.float64)
        except ValueError as exc:
            raise InvalidParameterError(f"{source}: malformed CSV matrix ({exc})") from exc
        return GridImage(values, unit=Unit.CELSIUS, resolution=resolution)
    gray = read_pgm(source)
    scale = read_scale(source)
    if scale is None:
        logger.warning(f"No {PGM_SCALE_SUFFIX} sidecar for {source}; using raw gray levels")
        return GridImage(gray.astype(np.float64), unit=Unit.GRAYLEVEL, resolution=1.0)
    return GridImage(scale["offset"] + scale["slope"] * gray, unit=Unit.CELSIUS, resolution=resolution)


def write_image(img: GridImage, path: PathLike, fmt: Optional[str] = None,
                digits: Optional[int] = None) -> Path:
    target = Path(path)
    kind = image_format(target, fmt)
    target.parent.mkdir(parents=True, exist_ok=True)
    if kind == "csv":
        precision = digits if digits is not None else get_settings().csv_digits
        np.savetxt(target, img.values, fmt=f"%.{precision}g", delimiter=CSV_DELIMITER)
        return target
    low, high = img.min_value, img.max_value
    slope = (high - low) / PGM_MAX_GRAY_16 if high > low else 1.0
    gray = np.rint((img.values - low) / slope).astype(np.int64)
    write_pgm(gray, target, PGM_MAX_GRAY_16)
    _scale_path(target).write_text(json.dumps({"offset": low, "slope": slope}, indent=2))
    return target


# ===========================================
# Masks, Contours and Reports
# ===========================================

def write_mask_pgm(mask: np.ndarray, path: PathLike) -> Path:
    arr = np.asarray(mask, dtype=bool)
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    return write_pgm(np.where(arr, MASK_BRIDGE_GRAY, MASK_EXTERNAL_GRAY), target, 255)


def read_mask_pgm(path: PathLike) -> np.ndarray:
    return read_pgm(path) >= (MASK_BRIDGE_GRAY + MASK_EXTERNAL_GRAY + 1) // 2


def write_contours_csv(pixels: Sequence[Tuple[int, int]], path: PathLike) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    lines = ["row,col"] + [f"{r},{c}" for r, c in pixels]
    target.write_text("\n".join(lines) + "\n")
    return target


def write_json(payload: Any, path: PathLike) -> Path:
    """Write a pydantic model or a plain mapping as indented JSON."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    if hasattr(payload, "model_dump_json"):
        target.write_text(payload.model_dump_json(indent=2))
    else:
        target.write_text(json.dumps(payload, indent=2, default=_json_default))
    return target


def read_json(path: PathLike) -> Dict[str, Any]:
    source = Path(path)
    if not source.exists():
        raise FileNotFoundError(f"JSON file not found: {source}")
    try:
        return json.loads(source.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidParameterError(f"{source}: invalid JSON ({exc})") from exc


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")
