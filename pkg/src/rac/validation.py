"""Input validation helpers shared across the package.

Images move between two representations: uint8 HxWx3 observations and
float64 arrays in [0, 1]. Masks are strict 0/1 uint8 arrays. All checks
raise ValueError with the offending shapes in the message.
"""

from __future__ import annotations

import numpy as np


def check_shape_match(a: np.ndarray, b: np.ndarray, what: str = "arrays") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} shape mismatch: {a.shape} vs {b.shape}")


def as_float_image(img: np.ndarray) -> np.ndarray:
    """Convert a uint8 image to float64 in [0, 1]; float input is validated and passed through."""
    img = np.asarray(img)
    if img.dtype == np.uint8:
        return img.astype(np.float64) / 255.0
    out = img.astype(np.float64, copy=False)
    if out.size and (out.min() < -1e-9 or out.max() > 1.0 + 1e-9):
        raise ValueError("float image values outside [0, 1]")
    return out


def as_uint8_image(img: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] float image to uint8 (round half away from zero via rint)."""
    img = np.asarray(img, dtype=np.float64)
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def check_mask(mask: np.ndarray) -> np.ndarray:
    """Validate a binary mask and return it as uint8 0/1."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {mask.shape}")
    vals = np.unique(mask)
    if not np.all(np.isin(vals, (0, 1))):
        raise ValueError("mask values must be exactly 0 or 1")
    return mask.astype(np.uint8, copy=False)


def check_finite(arr: np.ndarray, what: str = "array") -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")


def check_vector(v, dim: int, what: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (dim,):
        raise ValueError(f"{what} must have shape ({dim},), got {v.shape}")
    return v
