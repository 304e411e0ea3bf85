"""Pixel representation, colorspace conversions, and PNG input/output.

Images are float64 arrays of shape (H, W, C) with values in [0, 1].
Colorspace conversion follows full-range BT.601: luma weights
(0.299, 0.587, 0.114), chroma centered at +0.5.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image as PilImage

from watsonsim.errors import DataError, InputDomainError

KY = 0.299
KB = 0.114
KG = 1.0 - KY - KB  # 0.587


class Colorspace(Enum):
    GREY = "grey"
    RGB = "rgb"
    YCBCR = "ycbcr"


@dataclass(frozen=True)
class Image:
    """A single image: (H, W, C) float64 pixels in [0, 1] plus a colorspace tag."""

    pixels: np.ndarray
    colorspace: Colorspace

    def __post_init__(self):
        px = self.pixels
        if not isinstance(px, np.ndarray) or px.ndim != 3:
            raise InputDomainError("pixels must be a (H, W, C) array")
        expected = 1 if self.colorspace is Colorspace.GREY else 3
        if px.shape[2] != expected:
            raise InputDomainError(
                f"{self.colorspace.value} image needs {expected} channels, got {px.shape[2]}"
            )
        if px.dtype != np.float64:
            object.__setattr__(self, "pixels", px.astype(np.float64))
            px = self.pixels
        if not np.all(np.isfinite(px)):
            raise InputDomainError("pixels must be finite")
        if px.size and (px.min() < 0.0 or px.max() > 1.0):
            raise InputDomainError("pixels must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def channel(self, index: int) -> np.ndarray:
        return self.pixels[:, :, index]


def rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    """Convert (H, W, 3) RGB in [0, 1] to full-range YCbCr in [0, 1].

    Chroma axes are scaled so the full RGB cube maps into [0, 1]; the final
    clamp only strips sub-ulp float noise for in-range inputs.
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InputDomainError("rgb_to_ycbcr expects a (H, W, 3) array")
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    y = KY * r + KG * g + KB * b
    cb = 0.5 * (b - y) / (1.0 - KB) + 0.5
    cr = 0.5 * (r - y) / (1.0 - KY) + 0.5
    out = np.stack([y, cb, cr], axis=2)
    return np.clip(out, 0.0, 1.0)


def ycbcr_to_rgb(ycbcr: np.ndarray) -> np.ndarray:
    """Invert :func:`rgb_to_ycbcr`; out-of-gamut results are clamped to [0, 1]."""
    ycbcr = np.asarray(ycbcr, dtype=np.float64)
    if ycbcr.ndim != 3 or ycbcr.shape[2] != 3:
        raise InputDomainError("ycbcr_to_rgb expects a (H, W, 3) array")
    y, cb, cr = ycbcr[:, :, 0], ycbcr[:, :, 1], ycbcr[:, :, 2]
    r = y + 2.0 * (1.0 - KY) * (cr - 0.5)
    b = y + 2.0 * (1.0 - KB) * (cb - 0.5)
    g = (y - KY * r - KB * b) / KG
    out = np.stack([r, g, b], axis=2)
    return np.clip(out, 0.0, 1.0)


def to_ycbcr(image: Image) -> Image:
    if image.colorspace is Colorspace.YCBCR:
        return image
    if image.colorspace is Colorspace.RGB:
        return Image(rgb_to_ycbcr(image.pixels), Colorspace.YCBCR)
    raise InputDomainError("cannot convert a grey image to YCbCr")


def to_grey(image: Image) -> Image:
    """Extract luma: BT.601 weights for RGB, the Y channel for YCbCr."""
    if image.colorspace is Colorspace.GREY:
        return image
    if image.colorspace is Colorspace.RGB:
        r, g, b = (image.pixels[:, :, i] for i in range(3))
        y = KY * r + KG * g + KB * b
    else:
        y = image.pixels[:, :, 0]
    return Image(np.clip(y, 0.0, 1.0)[:, :, None], Colorspace.GREY)


_16BIT_MODES = ("I;16", "I;16B", "I;16L", "I;16N", "I")


def load_png(path: str | Path) -> Image:
    """Read an 8-bit or 16-bit PNG as float64 in [0, 1].

    Greyscale files become single-channel GREY images, color files RGB.
    """
    path = Path(path)
    try:
        with PilImage.open(path) as pil:
            mode = pil.mode
            if mode in _16BIT_MODES:
                arr = np.asarray(pil, dtype=np.float64) / 65535.0
                return Image(np.clip(arr, 0.0, 1.0)[:, :, None], Colorspace.GREY)
            if mode == "L":
                arr = np.asarray(pil, dtype=np.float64) / 255.0
                return Image(arr[:, :, None], Colorspace.GREY)
            if mode in ("RGB", "RGBA", "P", "LA"):
                arr = np.asarray(pil.convert("RGB"), dtype=np.float64) / 255.0
                return Image(arr, Colorspace.RGB)
            raise DataError(f"unsupported image mode {mode!r}", str(path))
    except DataError:
        raise
    except FileNotFoundError:
        raise DataError("image file not found", str(path))
    except Exception as exc:  # PIL raises a zoo of types for corrupt files
        raise DataError(f"unreadable image: {exc}", str(path))


def save_png(image: Image, path: str | Path, bit_depth: int = 8) -> None:
    """Write an image as PNG. 16-bit output is supported for greyscale only."""
    path = Path(path)
    px = image.pixels
    if bit_depth == 8:
        arr = np.round(px * 255.0).astype(np.uint8)
        if image.colorspace is Colorspace.GREY:
            PilImage.fromarray(arr[:, :, 0], mode="L").save(path, format="PNG")
        else:
            rgb = arr if image.colorspace is Colorspace.RGB else np.round(
                ycbcr_to_rgb(px) * 255.0
            ).astype(np.uint8)
            PilImage.fromarray(rgb, mode="RGB").save(path, format="PNG")
    elif bit_depth == 16:
        if image.colorspace is not Colorspace.GREY:
            raise InputDomainError("16-bit PNG output is greyscale only")
        arr = np.round(px[:, :, 0] * 65535.0).astype(np.uint16)
        PilImage.fromarray(arr).save(path, format="PNG")
    else:
        raise InputDomainError("bit_depth must be 8 or 16")
