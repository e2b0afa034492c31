"""PNG/JPEG reading and PNG writing through Pillow."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def read_image(path, mode: str = "RGB") -> np.ndarray:
    """Decode ``path`` into a ``uint8`` array, ``(H, W, 3)`` for RGB mode."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.format not in ("PNG", "JPEG"):
                raise DataError(f"{path}: unsupported image format {img.format}")
            return np.asarray(img.convert(mode))
    except (OSError, UnidentifiedImageError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"{path}: cannot decode image ({exc})") from exc


def write_png(path, pixels: np.ndarray) -> None:
    arr = np.asarray(pixels)
    if arr.dtype != np.uint8:
        raise ValueError(f"write_png expects uint8 pixels, got {arr.dtype}")
    Image.fromarray(arr).save(path, format="PNG")


def to_gray8(values: np.ndarray) -> np.ndarray:
    """Min-max scale a 2-D array to 0..255; a constant array maps to all zeros."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi <= lo:
        return np.zeros(v.shape, dtype=np.uint8)
    return np.round((v - lo) / (hi - lo) * 255.0).astype(np.uint8)
