"""Pixel-level preprocessing: resize, contrast stretch, grayscale, global threshold.

All operations are pure functions on immutable raster values. Rounding is
round-half-up throughout, so results are reproducible bit for bit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

FIXED = "fixed"
AUTO = "auto"

MAX_THRESHOLD_ITERATIONS = 64
THRESHOLD_TOLERANCE = 0.5


def _frozen_pixels(pixels, expected_ndim: int, what: str) -> np.ndarray:
    """Validate and return a read-only uint8 copy of a pixel array."""
    arr = np.asarray(pixels)
    if arr.ndim != expected_ndim:
        raise ValueError(f"{what} must have {expected_ndim} axes, got {arr.ndim}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"{what} requires integer pixel values")
    if arr.size and (int(arr.min()) < 0 or int(arr.max()) > 255):
        raise ValueError(f"{what} values must lie in [0, 255]")
    arr = arr.astype(np.uint8, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ColorImage:
    """8-bit RGB raster, shape (height, width, 3), row-major."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = _frozen_pixels(self.pixels, 3, "color image")
        if arr.shape[2] != 3:
            raise ValueError("color image must have exactly 3 channels")
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class GrayImage:
    """8-bit single-channel raster, shape (height, width), row-major."""

    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels", _frozen_pixels(self.pixels, 2, "gray image"))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class BinaryImage:
    """Foreground mask: 1 marks foreground, 0 background."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = _frozen_pixels(self.pixels, 2, "binary image")
        if arr.size and int(arr.max()) > 1:
            raise ValueError("binary image values must be 0 or 1")
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def foreground_count(self) -> int:
        return int(self.pixels.sum())


@dataclass(frozen=True)
class ContrastSetting:
    """Multiplicative contrast: fixed factor, or full-range auto stretch."""

    factor: float = 1.2
    mode: str = FIXED

    def __post_init__(self):
        if self.mode not in (FIXED, AUTO):
            raise ValueError(f"unknown contrast mode: {self.mode!r}")
        if self.mode == FIXED and not self.factor > 0:
            raise ValueError("contrast factor must be positive")


def resize(img: ColorImage, target_w: int, target_h: int) -> ColorImage:
    """Nearest-neighbor resample; integer-exact index mapping, no interpolation."""
    if img.width == 0 or img.height == 0:
        raise ValueError("empty input image")
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be at least 1")
    xs = (np.arange(target_w) * img.width) // target_w
    ys = (np.arange(target_h) * img.height) // target_h
    return ColorImage(img.pixels[ys[:, None], xs[None, :]])


def contrast_stretch(img: GrayImage, setting: ContrastSetting) -> GrayImage:
    """Multiply intensities by the contrast factor, clamp to the 8-bit range.

    Auto mode maps the brightest pixel to 255 (factor 255/max); an all-black
    image passes through unchanged.
    """
    if setting.mode == AUTO:
        peak = int(img.pixels.max()) if img.pixels.size else 0
        if peak == 0:
            return GrayImage(img.pixels)
        factor = 255.0 / peak
    else:
        factor = setting.factor
        if not factor > 0:
            raise ValueError("contrast factor must be positive")
    stretched = np.floor(img.pixels.astype(np.float64) * factor + 0.5)
    return GrayImage(np.clip(stretched, 0.0, 255.0).astype(np.uint8))


def to_grayscale(img: ColorImage) -> GrayImage:
    """Channel average (R+G+B)/3, round-half-up.

    (2s+3)//6 is the exact integer form of floor(s/3 + 1/2).
    """
    s = img.pixels.astype(np.int32).sum(axis=2)
    return GrayImage(((2 * s + 3) // 6).astype(np.uint8))


def compute_threshold(img: GrayImage) -> float:
    """Global threshold via the iterative mean-split fixed point.

    Starts at the image mean; repeatedly sets T to the midpoint of the means
    of the two sides until the update moves less than half a gray level.
    The returned T satisfies |T - (mu1 + mu2)/2| < 0.5.
    """
    if img.pixels.size == 0:
        raise ValueError("empty input image")
    values = img.pixels.astype(np.float64).ravel()
    t = float(values.mean())
    for _ in range(MAX_THRESHOLD_ITERATIONS):
        lower = values[values <= t]
        upper = values[values > t]
        if lower.size == 0 or upper.size == 0:
            return t
        t_next = 0.5 * (float(lower.mean()) + float(upper.mean()))
        if abs(t_next - t) < THRESHOLD_TOLERANCE:
            return t
        t = t_next
    return t


def binarize(img: GrayImage, threshold: float) -> BinaryImage:
    """Pixels strictly above the threshold become foreground (1), the rest 0."""
    if not 0.0 <= threshold <= 255.0:
        raise ValueError("threshold must lie in [0, 255]")
    return BinaryImage((img.pixels > threshold).astype(np.uint8))


def read_image(path: str | os.PathLike) -> ColorImage:
    """Load a PNG or BMP raster as RGB."""
    with Image.open(path) as im:
        return ColorImage(np.asarray(im.convert("RGB")))


def write_png(image: ColorImage | GrayImage | BinaryImage, path: str | os.PathLike) -> None:
    """Write any pipeline raster as PNG; masks are scaled to 0/255 for viewing."""
    if isinstance(image, ColorImage):
        pil = Image.fromarray(image.pixels, mode="RGB")
    elif isinstance(image, BinaryImage):
        pil = Image.fromarray(image.pixels * np.uint8(255), mode="L")
    elif isinstance(image, GrayImage):
        pil = Image.fromarray(image.pixels, mode="L")
    else:
        raise TypeError(f"cannot write {type(image).__name__} as PNG")
    pil.save(path, format="PNG")
