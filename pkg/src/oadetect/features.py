"""Histogram features and min-max normalization.

A sample's feature vector is the masked gray-level histogram followed by two
scalars: mean foreground intensity scaled to [0, 1] and the foreground area
fraction. Vectors are normalized per dimension onto [lower, upper] with
parameters fitted on the training set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .imaging import BinaryImage, GrayImage

DEFAULT_BINS = 32
DEFAULT_UPPER = 1.0
DEFAULT_LOWER = 0.0


def _frozen_floats(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{what} must be one-dimensional")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Histogram:
    """Gray-level distribution of the masked-in pixels."""

    probabilities: np.ndarray
    counts: np.ndarray
    total: int

    def __post_init__(self):
        probs = _frozen_floats(self.probabilities, "histogram probabilities")
        counts = np.asarray(self.counts, dtype=np.int64).copy()
        counts.setflags(write=False)
        if probs.shape != counts.shape:
            raise ValueError("probabilities and counts must have equal length")
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "counts", counts)

    @property
    def nbins(self) -> int:
        return int(self.probabilities.shape[0])


@dataclass(frozen=True)
class FeatureVector:
    """One sample: histogram probabilities plus the grayscale and area scalars."""

    values: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_floats(self.values, "feature values"))

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class NormalizationParams:
    """Fitted per-dimension minima/maxima and the target bounds."""

    minimums: np.ndarray
    maximums: np.ndarray
    upper: float = DEFAULT_UPPER
    lower: float = DEFAULT_LOWER

    def __post_init__(self):
        mins = _frozen_floats(self.minimums, "minimums")
        maxs = _frozen_floats(self.maximums, "maximums")
        if mins.shape != maxs.shape:
            raise ValueError("minimums and maximums must have equal length")
        if np.any(mins > maxs):
            raise ValueError("per-dimension minimum exceeds maximum")
        if not self.lower < self.upper:
            raise ValueError("invalid bounds")
        object.__setattr__(self, "minimums", mins)
        object.__setattr__(self, "maximums", maxs)

    @property
    def dimensions(self) -> int:
        return int(self.minimums.shape[0])


def histogram(gray: GrayImage, mask: BinaryImage, bins: int = DEFAULT_BINS) -> Histogram:
    """Histogram of gray levels over mask==1 pixels, normalized to probabilities.

    Bin index is intensity * bins // 256, so 256 must be divisible by bins.
    An empty mask yields an all-zero histogram with total 0.
    """
    if gray.pixels.shape != mask.pixels.shape:
        raise ValueError("mask/image dimension mismatch")
    if not 1 <= bins <= 256 or 256 % bins != 0:
        raise ValueError("bin count must divide 256 and lie in [1, 256]")
    foreground = gray.pixels[mask.pixels == 1]
    indices = (foreground.astype(np.int64) * bins) // 256
    counts = np.bincount(indices, minlength=bins)
    total = int(foreground.size)
    if total:
        probabilities = counts / total
    else:
        probabilities = np.zeros(bins, dtype=np.float64)
    return Histogram(probabilities, counts, total)


def extract_features(
    gray: GrayImage,
    mask: BinaryImage,
    bins: int = DEFAULT_BINS,
    source_id: str = "",
) -> FeatureVector:
    """Histogram probabilities ++ [foreground mean / 255, foreground fraction]."""
    hist = histogram(gray, mask, bins)
    pixel_count = gray.width * gray.height
    if hist.total:
        foreground = gray.pixels[mask.pixels == 1]
        mean_gray = float(foreground.mean()) / 255.0
        area = hist.total / pixel_count
    else:
        mean_gray = 0.0
        area = 0.0
    values = np.concatenate([hist.probabilities, [mean_gray, area]])
    return FeatureVector(values, source_id)


def minmax_fit(
    samples: Sequence[FeatureVector],
    upper: float = DEFAULT_UPPER,
    lower: float = DEFAULT_LOWER,
) -> NormalizationParams:
    """Record per-dimension minima and maxima over the sample set."""
    if len(samples) == 0:
        raise ValueError("no samples")
    if not lower < upper:
        raise ValueError("invalid bounds")
    width = len(samples[0])
    if any(len(s) != width for s in samples):
        raise ValueError("dimension mismatch")
    matrix = np.stack([s.values for s in samples])
    return NormalizationParams(matrix.min(axis=0), matrix.max(axis=0), upper, lower)


def minmax_apply(vector: FeatureVector, params: NormalizationParams) -> FeatureVector:
    """Rescale each dimension onto [lower, upper].

    The fitted minimum maps exactly to the lower bound and the fitted maximum
    exactly to the upper bound; out-of-range values clamp. Constant dimensions
    (min == max) map to the midpoint.
    """
    if len(vector) != params.dimensions:
        raise ValueError("dimension mismatch")
    span = params.maximums - params.minimums
    fraction = np.zeros_like(span)
    np.divide(vector.values - params.minimums, span, out=fraction, where=span != 0)
    scaled = fraction * params.upper + (1.0 - fraction) * params.lower
    scaled[span == 0] = 0.5 * (params.upper + params.lower)
    np.clip(scaled, params.lower, params.upper, out=scaled)
    return FeatureVector(scaled, vector.source_id)
