"""Dataset handling: folder ingestion, synthetic radiographs, text persistence.

Feature sets, normalization parameters, and trained models are stored as
line-oriented text: `#`-prefixed header lines, `;` between record fields,
`,` between numbers. Values are printed with 17 significant digits so every
double survives a write/read round trip bit for bit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TypeVar

import numpy as np

from .features import (
    DEFAULT_BINS,
    FeatureVector,
    NormalizationParams,
    extract_features,
)
from .imaging import (
    ColorImage,
    ContrastSetting,
    binarize,
    compute_threshold,
    contrast_stretch,
    read_image,
    resize,
    to_grayscale,
)
from .som import CLASS_LABELS, GENERATOR_NAME, NORMAL, SICK, SomConfig, SomModel

IMAGE_SUFFIXES = {".png", ".bmp"}
FLOAT_FORMAT = ".17g"

T = TypeVar("T")


class DatasetError(Exception):
    """Raised for unreadable datasets and malformed persistence files."""


@dataclass(frozen=True)
class LabeledSample:
    """A feature vector with its diagnosis label and originating file."""

    features: FeatureVector
    label: str
    source: str

    def __post_init__(self):
        if self.label not in CLASS_LABELS:
            raise ValueError(f"label must be one of {CLASS_LABELS}, got {self.label!r}")


@dataclass(frozen=True)
class DatasetManifest:
    """Two-folder corpus layout: one directory per diagnosis."""

    normal_dir: Path
    sick_dir: Path


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of a generated corpus; identical specs yield identical corpora."""

    count_normal: int = 12
    count_sick: int = 30
    width: int = 150
    height: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.count_normal < 0 or self.count_sick < 0:
            raise ValueError("image counts must be non-negative")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be at least 1")


@dataclass(frozen=True)
class PipelineSettings:
    """Preprocessing knobs applied to every ingested image."""

    bins: int = DEFAULT_BINS
    contrast: ContrastSetting = ContrastSetting()
    target_width: int = 150
    target_height: int = 200


@dataclass(frozen=True)
class IngestResult:
    """Ingested samples plus the skip report and per-label counts."""

    samples: tuple[LabeledSample, ...]
    skipped: tuple[tuple[str, str], ...]
    counts: dict[str, int] = field(default_factory=dict)


def pipeline_features(
    img: ColorImage, settings: PipelineSettings, source_id: str = ""
) -> FeatureVector:
    """Run one image through resize, grayscale, contrast, threshold, features."""
    resized = resize(img, settings.target_width, settings.target_height)
    gray = to_grayscale(resized)
    enhanced = contrast_stretch(gray, settings.contrast)
    mask = binarize(enhanced, compute_threshold(enhanced))
    return extract_features(enhanced, mask, settings.bins, source_id)


def ingest(manifest: DatasetManifest, settings: PipelineSettings = PipelineSettings()) -> IngestResult:
    """Read every PNG/BMP under the two label folders and extract features.

    Files are processed in lexicographic path order so downstream training is
    order-deterministic. Unreadable files are skipped and reported, never
    fatal; an entirely unreadable corpus is.
    """
    directories = ((Path(manifest.normal_dir), NORMAL), (Path(manifest.sick_dir), SICK))
    for directory, _ in directories:
        if not directory.is_dir():
            raise DatasetError(f"missing directory: {directory}")
    entries = []
    for directory, label in directories:
        for path in directory.iterdir():
            if path.is_file() and path.suffix.lower() in IMAGE_SUFFIXES:
                source = f"{directory.name}/{path.name}"
                entries.append((path, label, source))
    entries.sort(key=lambda entry: str(entry[0]))

    samples: list[LabeledSample] = []
    skipped: list[tuple[str, str]] = []
    for path, label, source in entries:
        try:
            image = read_image(path)
        except Exception as exc:  # Pillow raises several unrelated types
            skipped.append((str(path), str(exc)))
            continue
        samples.append(LabeledSample(pipeline_features(image, settings, source), label, source))
    if not samples:
        raise DatasetError("empty dataset")
    counts = {label: sum(1 for s in samples if s.label == label) for label in CLASS_LABELS}
    return IngestResult(tuple(samples), tuple(skipped), counts)


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

def generate_synthetic(spec: SyntheticSpec) -> list[tuple[ColorImage, str]]:
    """Generate bone-like test images, healthy first, then diseased.

    Healthy images show wide, bright finger bones with open joint gaps.
    Diseased images use thinner, dimmer bones with narrowed gaps and eroded
    boundaries, which shrinks the thresholded area and shifts histogram mass.
    """
    rng = np.random.default_rng(spec.seed)
    corpus: list[tuple[ColorImage, str]] = []
    for _ in range(spec.count_normal):
        corpus.append((_synthetic_radiograph(rng, spec.width, spec.height, sick=False), NORMAL))
    for _ in range(spec.count_sick):
        corpus.append((_synthetic_radiograph(rng, spec.width, spec.height, sick=True), SICK))
    return corpus


# Bone intensity ramps are fixed per class so every image of a class spreads
# its histogram mass over the same gray range; the two ranges do not overlap.
_NORMAL_RAMP = (175.0, 230.0)
_SICK_RAMP = (125.0, 172.0)
_EDGE_WIDTH = 1.5


def _synthetic_radiograph(rng: np.random.Generator, width: int, height: int, sick: bool) -> ColorImage:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    base = rng.uniform(16.0, 26.0)
    tilt = rng.uniform(4.0, 10.0)
    canvas = base + tilt * yy / max(height - 1, 1)
    canvas += rng.normal(0.0, 4.0, size=(height, width))

    ramp_lo, ramp_hi = _SICK_RAMP if sick else _NORMAL_RAMP
    bone_count = int(rng.integers(3, 5))
    for index in range(bone_count):
        center_x = (index + 1) * width / (bone_count + 1) + rng.uniform(-4.0, 4.0)
        if sick:
            half_width = rng.uniform(4.5, 6.5) * width / 150.0
            gap = rng.uniform(1.0, 3.0) * height / 200.0
        else:
            half_width = rng.uniform(8.5, 11.5) * width / 150.0
            gap = rng.uniform(6.0, 10.0) * height / 200.0
        top = rng.uniform(0.08, 0.16) * height
        bottom = rng.uniform(0.84, 0.94) * height
        joint = top + rng.uniform(0.42, 0.58) * (bottom - top)
        level = ramp_lo + (ramp_hi - ramp_lo) * np.clip((yy - top) / (bottom - top), 0.0, 1.0)
        segments = ((top, joint - gap / 2.0), (joint + gap / 2.0, bottom))
        for y_start, y_end in segments:
            axial = np.maximum(np.maximum(y_start - yy, yy - y_end), 0.0)
            dist = np.sqrt((xx - center_x) ** 2 + axial**2)
            rim = np.sqrt(np.clip((half_width - dist) / _EDGE_WIDTH, 0.0, 1.0))
            np.maximum(canvas, level * rim, out=canvas)
        if sick:
            for _ in range(int(rng.integers(9, 15))):
                seg_start, seg_end = segments[int(rng.integers(0, 2))]
                bite_y = rng.uniform(seg_start, seg_end)
                bite_x = center_x + rng.choice((-1.0, 1.0)) * half_width * rng.uniform(0.6, 1.05)
                bite_r = rng.uniform(1.5, 3.5) * width / 150.0
                bite_sq = ((xx - bite_x) ** 2 + (yy - bite_y) ** 2) / bite_r**2
                canvas *= 1.0 - 0.9 * np.clip(1.0 - bite_sq, 0.0, 1.0)

    levels = np.clip(np.floor(canvas + 0.5), 0.0, 255.0).astype(np.uint8)
    return ColorImage(np.repeat(levels[:, :, None], 3, axis=2))


def stratified_split(
    entries: Sequence[tuple[T, str]], test_fraction: float, seed: int
) -> tuple[list[tuple[T, str]], list[tuple[T, str]]]:
    """Seeded per-label split into (train, test), preserving input order."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    test_positions: set[int] = set()
    for label in CLASS_LABELS:
        positions = [i for i, (_, lab) in enumerate(entries) if lab == label]
        if not positions:
            continue
        count = int(round(len(positions) * test_fraction))
        if len(positions) >= 2:
            count = min(max(count, 1), len(positions) - 1)
        order = rng.permutation(len(positions))
        test_positions.update(positions[i] for i in order[:count])
    train = [entry for i, entry in enumerate(entries) if i not in test_positions]
    test = [entry for i, entry in enumerate(entries) if i in test_positions]
    return train, test


# ---------------------------------------------------------------------------
# Text persistence
# ---------------------------------------------------------------------------

def _format_values(values: Iterable[float]) -> str:
    return ",".join(format(v, FLOAT_FORMAT) for v in values)


def _parse_header(line: str, kind: str, path: str) -> dict[str, str]:
    prefix = f"# {kind} "
    if not line.startswith(prefix):
        raise DatasetError(f"{path}: not a {kind} file (bad header)")
    fields = {}
    for token in line[len(prefix):].split():
        key, _, value = token.partition("=")
        if not value:
            raise DatasetError(f"{path}: malformed header token {token!r}")
        fields[key] = value
    return fields


def _parse_floats(text: str, path: str, lineno: int) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",")], dtype=np.float64)
    except ValueError as exc:
        raise DatasetError(f"{path}: malformed values on line {lineno}: {exc}") from None


def write_features(
    samples: Sequence[LabeledSample], path: str | os.PathLike, bins: int | None = None
) -> None:
    """Write one `label;source;v1,...,vk` line per sample under a k/bins header."""
    dims = len(samples[0].features) if samples else 0
    if bins is None:
        bins = max(dims - 2, 0)
    lines = [f"# features k={dims} bins={bins}"]
    for sample in samples:
        lines.append(f"{sample.label};{sample.source};{_format_values(sample.features.values)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def read_features(path: str | os.PathLike) -> tuple[list[LabeledSample], int]:
    """Inverse of write_features; returns (samples, bins)."""
    name = str(path)
    text = Path(path).read_text(encoding="ascii")
    lines = text.splitlines()
    if not lines:
        raise DatasetError(f"{name}: empty file")
    header = _parse_header(lines[0], "features", name)
    try:
        dims = int(header["k"])
        bins = int(header["bins"])
    except (KeyError, ValueError):
        raise DatasetError(f"{name}: header must record k and bins") from None
    samples: list[LabeledSample] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(";", 2)
        if len(parts) != 3:
            raise DatasetError(f"{name}: malformed sample on line {lineno}")
        label, source, value_text = parts
        if label not in CLASS_LABELS:
            raise DatasetError(f"{name}: unknown label {label!r} on line {lineno}")
        values = _parse_floats(value_text, name, lineno)
        if values.shape[0] != dims:
            raise DatasetError(
                f"{name}: line {lineno} has {values.shape[0]} values, header says k={dims}"
            )
        samples.append(LabeledSample(FeatureVector(values, source), label, source))
    return samples, bins


def write_norm_params(params: NormalizationParams, path: str | os.PathLike) -> None:
    """Persist fitted normalization bounds as text."""
    lines = [
        f"# norm k={params.dimensions}"
        f" U={format(params.upper, FLOAT_FORMAT)} L={format(params.lower, FLOAT_FORMAT)}",
        f"min;{_format_values(params.minimums)}",
        f"max;{_format_values(params.maximums)}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def read_norm_params(path: str | os.PathLike) -> NormalizationParams:
    name = str(path)
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if len(lines) < 3:
        raise DatasetError(f"{name}: truncated normalization file")
    header = _parse_header(lines[0], "norm", name)
    try:
        dims = int(header["k"])
        upper = float(header["U"])
        lower = float(header["L"])
    except (KeyError, ValueError):
        raise DatasetError(f"{name}: header must record k, U and L") from None
    rows = {}
    for lineno, line in enumerate(lines[1:3], start=2):
        key, _, value_text = line.partition(";")
        if key not in ("min", "max"):
            raise DatasetError(f"{name}: expected min/max row on line {lineno}")
        rows[key] = _parse_floats(value_text, name, lineno)
    if "min" not in rows or "max" not in rows:
        raise DatasetError(f"{name}: missing min or max row")
    if rows["min"].shape[0] != dims or rows["max"].shape[0] != dims:
        raise DatasetError(f"{name}: min/max length does not match header k={dims}")
    return NormalizationParams(rows["min"], rows["max"], upper, lower)


def write_model(model: SomModel, path: str | os.PathLike) -> None:
    """Persist a model as text: header, one weight row per cluster, label rows."""
    config = model.config
    header = (
        f"# som v=1 j={config.clusters} k={config.dims} epochs={config.epochs}"
        f" alpha0={format(config.alpha0, FLOAT_FORMAT)} seed={config.seed}"
        f" generator={GENERATOR_NAME} trained_epochs={model.trained_epochs}"
    )
    lines = [header]
    for cluster in range(config.clusters):
        lines.append(f"w;{cluster};{_format_values(model.weights[cluster])}")
    if model.label_map is not None:
        for cluster in sorted(model.label_map):
            lines.append(f"label;{cluster};{model.label_map[cluster]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def read_model(path: str | os.PathLike) -> SomModel:
    """Inverse of write_model; raises DatasetError on version or shape mismatch."""
    name = str(path)
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines:
        raise DatasetError(f"{name}: empty file")
    header = _parse_header(lines[0], "som", name)
    if header.get("v") != "1":
        raise DatasetError(f"{name}: unsupported model version {header.get('v')!r}")
    if header.get("generator", GENERATOR_NAME) != GENERATOR_NAME:
        raise DatasetError(f"{name}: unknown generator {header.get('generator')!r}")
    try:
        clusters = int(header["j"])
        dims = int(header["k"])
        epochs = int(header["epochs"])
        alpha0 = float(header["alpha0"])
        seed = int(header["seed"])
        trained_epochs = int(header.get("trained_epochs", "0"))
    except (KeyError, ValueError):
        raise DatasetError(f"{name}: header must record j, k, epochs, alpha0, seed") from None

    weights = np.zeros((clusters, dims))
    seen = [False] * clusters
    label_map: dict[int, str] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(";", 2)
        if len(parts) != 3:
            raise DatasetError(f"{name}: malformed row on line {lineno}")
        kind, index_text, payload = parts
        try:
            index = int(index_text)
        except ValueError:
            raise DatasetError(f"{name}: bad cluster index on line {lineno}") from None
        if not 0 <= index < clusters:
            raise DatasetError(f"{name}: cluster index {index} out of range on line {lineno}")
        if kind == "w":
            row = _parse_floats(payload, name, lineno)
            if row.shape[0] != dims:
                raise DatasetError(
                    f"{name}: weight row on line {lineno} has {row.shape[0]} values,"
                    f" header says k={dims}"
                )
            weights[index] = row
            seen[index] = True
        elif kind == "label":
            if payload not in CLASS_LABELS:
                raise DatasetError(f"{name}: unknown label {payload!r} on line {lineno}")
            label_map[index] = payload
        else:
            raise DatasetError(f"{name}: unknown row kind {kind!r} on line {lineno}")
    if not all(seen):
        raise DatasetError(f"{name}: missing weight rows for {seen.count(False)} cluster(s)")
    config = SomConfig(dims=dims, clusters=clusters, epochs=epochs, alpha0=alpha0, seed=seed)
    return SomModel(
        weights=weights,
        label_map=label_map or None,
        config=config,
        trained_epochs=trained_epochs,
    )
