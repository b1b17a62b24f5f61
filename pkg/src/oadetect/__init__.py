"""Osteoarthritis screening for hand radiographs.

Pipeline: contrast enhancement, grayscale, iterative global threshold,
masked histogram features, min-max normalization, and a two-cluster
winner-takes-all self-organizing map.
"""

from .features import (
    FeatureVector,
    Histogram,
    NormalizationParams,
    extract_features,
    histogram,
    minmax_apply,
    minmax_fit,
)
from .imaging import (
    BinaryImage,
    ColorImage,
    ContrastSetting,
    GrayImage,
    binarize,
    compute_threshold,
    contrast_stretch,
    read_image,
    resize,
    to_grayscale,
    write_png,
)
from .som import (
    NORMAL,
    SICK,
    SomConfig,
    SomModel,
    TrainingTrace,
    assign_labels,
    avg_quantization_error,
    classify,
    find_winner,
    init_weights,
    sse,
    train,
    update_winner,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryImage",
    "ColorImage",
    "ContrastSetting",
    "FeatureVector",
    "GrayImage",
    "Histogram",
    "NORMAL",
    "NormalizationParams",
    "SICK",
    "SomConfig",
    "SomModel",
    "TrainingTrace",
    "assign_labels",
    "avg_quantization_error",
    "binarize",
    "classify",
    "compute_threshold",
    "contrast_stretch",
    "extract_features",
    "find_winner",
    "histogram",
    "init_weights",
    "minmax_apply",
    "minmax_fit",
    "read_image",
    "resize",
    "sse",
    "to_grayscale",
    "train",
    "update_winner",
    "write_png",
]
