"""Command-line surface: synth, extract, train, test, and the run meta-command.

Exit codes: 0 success, 1 usage error, 2 data error (missing/unreadable or
malformed files), 3 numeric or shape error.
"""

from __future__ import annotations

import argparse
import math
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataset, som
from .dataset import (
    DatasetError,
    DatasetManifest,
    FLOAT_FORMAT,
    LabeledSample,
    PipelineSettings,
    SyntheticSpec,
)
from .features import minmax_apply, minmax_fit
from .imaging import AUTO, FIXED, ContrastSetting, write_png
from .som import CLASS_LABELS, NORMAL, SICK, SomConfig, SomModel

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DEFAULT_TEST_FRACTION = 1.0 / 3.0

_LABEL_DIRS = {NORMAL: "normal", SICK: "sick"}


@dataclass(frozen=True)
class ReportRow:
    source: str
    true_label: str
    predicted: str
    distance_normal: float
    distance_sick: float


@dataclass(frozen=True)
class EvaluationReport:
    """Per-sample predictions plus accuracy, confusion counts, SSE and AVG."""

    rows: tuple[ReportRow, ...]
    confusion: np.ndarray  # 2x2, rows = true label, columns = predicted
    accuracy: float
    sse: float
    avg: float

    @property
    def correct(self) -> int:
        return int(np.trace(self.confusion))

    @property
    def total(self) -> int:
        return int(self.confusion.sum())


def build_report(model: SomModel, samples: list[LabeledSample]) -> EvaluationReport:
    """Classify every sample and tally the evaluation metrics."""
    if not samples:
        raise ValueError("no samples")
    if model.label_map is None or len(model.label_map) != model.config.clusters:
        raise ValueError("untrained model")
    label_clusters = {
        label: [c for c, lab in model.label_map.items() if lab == label]
        for label in CLASS_LABELS
    }
    index = {label: i for i, label in enumerate(CLASS_LABELS)}
    confusion = np.zeros((2, 2), dtype=np.int64)
    rows = []
    for sample in samples:
        squared = [som.distance(model, sample.features, c) for c in range(model.config.clusters)]
        predicted = som.classify(model, sample.features)
        by_label = {}
        for label in CLASS_LABELS:
            clusters = label_clusters[label]
            by_label[label] = min(math.sqrt(squared[c]) for c in clusters) if clusters else math.nan
        confusion[index[sample.label], index[predicted]] += 1
        rows.append(ReportRow(sample.source, sample.label, predicted, by_label[NORMAL], by_label[SICK]))
    vectors = [s.features for s in samples]
    return EvaluationReport(
        rows=tuple(rows),
        confusion=confusion,
        accuracy=float(np.trace(confusion) / confusion.sum()),
        sse=som.sse(model, vectors),
        avg=som.avg_quantization_error(model, vectors),
    )


def _format_confusion(confusion: np.ndarray) -> list[str]:
    width = max(len(label) for label in CLASS_LABELS)
    header = " " * (width + 2) + "  ".join(f"{label:>6}" for label in CLASS_LABELS)
    lines = [header]
    for i, label in enumerate(CLASS_LABELS):
        cells = "  ".join(f"{int(confusion[i, j]):>6}" for j in range(len(CLASS_LABELS)))
        lines.append(f"{label:<{width + 2}}{cells}")
    return lines


def format_report_text(report: EvaluationReport) -> str:
    """Aligned per-sample table followed by the summary metrics."""
    source_width = max([len("source")] + [len(r.source) for r in report.rows])
    lines = [f"{'source':<{source_width}}  {'true':<8}{'predicted':<9}"]
    lines.append("-" * len(lines[0]))
    for row in report.rows:
        lines.append(f"{row.source:<{source_width}}  {row.true_label:<8}{row.predicted:<9}")
    lines.append("")
    lines.append("confusion (rows = true, columns = predicted)")
    lines.extend(_format_confusion(report.confusion))
    lines.append("")
    lines.append(f"accuracy: {report.accuracy * 100:.2f}% ({report.correct}/{report.total})")
    lines.append(f"SSE: {format(report.sse, FLOAT_FORMAT)}")
    lines.append(f"AVG: {format(report.avg, FLOAT_FORMAT)}")
    return "\n".join(lines) + "\n"


def write_report(report: EvaluationReport, text_path: Path) -> Path:
    """Write the text report and its CSV sibling; returns the CSV path."""
    text_path.write_text(format_report_text(report), encoding="ascii", newline="\n")
    csv_path = text_path.with_suffix(".csv")
    lines = [
        f"# report accuracy={format(report.accuracy, FLOAT_FORMAT)}"
        f" sse={format(report.sse, FLOAT_FORMAT)} avg={format(report.avg, FLOAT_FORMAT)}",
        "source,true,predicted,distance_normal,distance_sick",
    ]
    for row in report.rows:
        lines.append(
            f"{row.source},{row.true_label},{row.predicted},"
            f"{format(row.distance_normal, FLOAT_FORMAT)},"
            f"{format(row.distance_sick, FLOAT_FORMAT)}"
        )
    csv_path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")
    return csv_path


# ---------------------------------------------------------------------------
# Command bodies (plain functions so `run` and the tests can reuse them)
# ---------------------------------------------------------------------------

def do_synth(spec: SyntheticSpec, out_dir: Path) -> tuple[int, int]:
    """Write the generated corpus as PNG folders normal/ and sick/."""
    for sub in _LABEL_DIRS.values():
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    counters = {NORMAL: 0, SICK: 0}
    for image, label in dataset.generate_synthetic(spec):
        sub = _LABEL_DIRS[label]
        write_png(image, out_dir / sub / f"{sub}_{counters[label]:03d}.png")
        counters[label] += 1
    return counters[NORMAL], counters[SICK]


def do_extract(
    manifest: DatasetManifest,
    out_path: Path,
    settings: PipelineSettings,
    norm_from: Path | None = None,
    dump_dir: Path | None = None,
) -> list[LabeledSample]:
    """Ingest a corpus, normalize the features, and write the feature file.

    Without norm_from the normalization bounds are fitted on this corpus and
    written to the `<out>.norm` sidecar; with it they are loaded, so test
    data reuses the training-set scaling.
    """
    result = dataset.ingest(manifest, settings)
    for path, reason in result.skipped:
        print(f"skipped {path}: {reason}", file=sys.stderr)
    if dump_dir is not None:
        dump_dir.mkdir(parents=True, exist_ok=True)
        for sample in result.samples:
            name = sample.source.replace("/", "_") + ".csv"
            rows = ["bin,probability"]
            for i, p in enumerate(sample.features.values[: settings.bins]):
                rows.append(f"{i},{format(p, FLOAT_FORMAT)}")
            (dump_dir / name).write_text("\n".join(rows) + "\n", encoding="ascii", newline="\n")
    if norm_from is None:
        params = minmax_fit([s.features for s in result.samples])
        dataset.write_norm_params(params, Path(str(out_path) + ".norm"))
    else:
        params = dataset.read_norm_params(norm_from)
    normalized = [
        LabeledSample(minmax_apply(s.features, params), s.label, s.source)
        for s in result.samples
    ]
    dataset.write_features(normalized, out_path, settings.bins)
    return normalized


def do_train(
    features_path: Path,
    model_path: Path,
    epochs: int,
    learning_rate: float,
    seed: int,
    clusters: int = 2,
    report_path: Path | None = None,
) -> tuple[SomModel, EvaluationReport]:
    """Train on a feature file, label the clusters, persist the model."""
    samples, _ = dataset.read_features(features_path)
    if not samples:
        raise DatasetError(f"{features_path}: no samples to train on")
    vectors = [s.features for s in samples]
    config = SomConfig(
        dims=len(vectors[0]), clusters=clusters, epochs=epochs, alpha0=learning_rate, seed=seed
    )
    model, trace = som.train(vectors, config)
    model = som.assign_labels(model, vectors, [s.label for s in samples])
    dataset.write_model(model, model_path)
    report = build_report(model, samples)

    lines = [f"trained {model.trained_epochs} epoch(s), final learning rate "
             f"{format(trace.alphas[-1], FLOAT_FORMAT)}"]
    head = trace.sse_per_epoch[:3]
    tail = trace.sse_per_epoch[-3:]
    lines.append("SSE head: " + ", ".join(format(v, FLOAT_FORMAT) for v in head))
    lines.append("SSE tail: " + ", ".join(format(v, FLOAT_FORMAT) for v in tail))
    lines.append(f"AVG: {format(trace.final_avg, FLOAT_FORMAT)}")
    lines.append("")
    lines.append("training-set confusion (rows = true, columns = predicted)")
    lines.extend(_format_confusion(report.confusion))
    lines.append(f"training accuracy: {report.accuracy * 100:.2f}% ({report.correct}/{report.total})")
    text = "\n".join(lines) + "\n"
    if report_path is not None:
        report_path.write_text(text, encoding="ascii", newline="\n")
    print(text, end="")
    return model, report


def do_test(model_path: Path, features_path: Path, report_path: Path) -> EvaluationReport:
    """Classify a feature file against a stored model and write the reports."""
    model = dataset.read_model(model_path)
    samples, _ = dataset.read_features(features_path)
    if not samples:
        raise DatasetError(f"{features_path}: no samples to test")
    if len(samples[0].features) != model.config.dims:
        raise ValueError(
            f"dimension mismatch: model expects k={model.config.dims},"
            f" features have k={len(samples[0].features)}"
        )
    report = build_report(model, samples)
    write_report(report, report_path)
    print(f"test accuracy: {report.accuracy * 100:.2f}% ({report.correct}/{report.total})")
    return report


def do_run(
    out_dir: Path,
    seed: int,
    spec: SyntheticSpec,
    settings: PipelineSettings,
    epochs: int,
    learning_rate: float,
    test_fraction: float = DEFAULT_TEST_FRACTION,
) -> EvaluationReport:
    """Full desk-scale experiment: synth, split, extract, train, test."""
    images_dir = out_dir / "images"
    do_synth(spec, images_dir)
    entries: list[tuple[Path, str]] = []
    for label in CLASS_LABELS:
        sub = images_dir / _LABEL_DIRS[label]
        entries.extend((path, label) for path in sorted(sub.iterdir()))
    train_entries, test_entries = dataset.stratified_split(entries, test_fraction, seed)
    for split_name, split_entries in (("train", train_entries), ("test", test_entries)):
        for sub in _LABEL_DIRS.values():
            (out_dir / split_name / sub).mkdir(parents=True, exist_ok=True)
        for path, label in split_entries:
            shutil.copyfile(path, out_dir / split_name / _LABEL_DIRS[label] / path.name)

    train_features = out_dir / "train_features.txt"
    test_features = out_dir / "test_features.txt"
    do_extract(
        DatasetManifest(out_dir / "train" / "normal", out_dir / "train" / "sick"),
        train_features,
        settings,
    )
    do_extract(
        DatasetManifest(out_dir / "test" / "normal", out_dir / "test" / "sick"),
        test_features,
        settings,
        norm_from=Path(str(train_features) + ".norm"),
    )
    do_train(
        train_features,
        out_dir / "model.txt",
        epochs,
        learning_rate,
        seed,
        report_path=out_dir / "train_report.txt",
    )
    return do_test(out_dir / "model.txt", test_features, out_dir / "report.txt")


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse API
        raise UsageError(message)


def _contrast_setting(text: str) -> ContrastSetting:
    if text.lower() == AUTO:
        return ContrastSetting(factor=1.0, mode=AUTO)
    try:
        return ContrastSetting(factor=float(text), mode=FIXED)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oadetect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic radiograph corpus")
    synth.add_argument("--out", type=Path, required=True, help="output directory")
    synth.add_argument("--count-normal", type=int, default=12)
    synth.add_argument("--count-sick", type=int, default=30)
    synth.add_argument("--width", type=int, default=150)
    synth.add_argument("--height", type=int, default=200)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=_cmd_synth)

    extract = sub.add_parser("extract", help="extract normalized features from image folders")
    extract.add_argument("--normal", type=Path, required=True, help="folder of Normal images")
    extract.add_argument("--sick", type=Path, required=True, help="folder of Sick images")
    extract.add_argument("--out", type=Path, required=True, help="feature file to write")
    extract.add_argument("--bins", type=int, default=32, help="histogram bin count")
    extract.add_argument("--contrast", type=_contrast_setting, default=ContrastSetting(),
                         help="contrast factor, or 'auto' for full-range stretch")
    extract.add_argument("--norm-from", type=Path, default=None,
                         help="reuse normalization bounds from this sidecar instead of fitting")
    extract.add_argument("--dump-histograms", type=Path, default=None,
                         help="directory for per-image bin,probability CSV dumps")
    extract.set_defaults(func=_cmd_extract)

    train = sub.add_parser("train", help="train the clustering model on a feature file")
    train.add_argument("--features", type=Path, required=True)
    train.add_argument("--out", type=Path, required=True, help="model file to write")
    train.add_argument("--epochs", type=int, default=700)
    train.add_argument("--lr", type=float, default=0.1, help="initial learning rate")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--clusters", type=int, default=2)
    train.add_argument("--report", type=Path, default=None,
                       help="training report path (default: <model>.report.txt)")
    train.set_defaults(func=_cmd_train)

    test = sub.add_parser("test", help="classify a feature file against a stored model")
    test.add_argument("--model", type=Path, required=True)
    test.add_argument("--features", type=Path, required=True)
    test.add_argument("--out", type=Path, required=True, help="report file to write")
    test.set_defaults(func=_cmd_test)

    run = sub.add_parser("run", help="synth + split + extract + train + test in one go")
    run.add_argument("--out", type=Path, required=True, help="working directory")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--count-normal", type=int, default=12)
    run.add_argument("--count-sick", type=int, default=30)
    run.add_argument("--width", type=int, default=150)
    run.add_argument("--height", type=int, default=200)
    run.add_argument("--bins", type=int, default=32)
    run.add_argument("--contrast", type=_contrast_setting, default=ContrastSetting())
    run.add_argument("--epochs", type=int, default=700)
    run.add_argument("--lr", type=float, default=0.1)
    run.add_argument("--test-fraction", type=float, default=DEFAULT_TEST_FRACTION)
    run.set_defaults(func=_cmd_run)

    return parser


def _cmd_synth(args) -> int:
    spec = SyntheticSpec(args.count_normal, args.count_sick, args.width, args.height, args.seed)
    wrote_normal, wrote_sick = do_synth(spec, args.out)
    print(f"wrote {wrote_normal} normal and {wrote_sick} sick image(s) under {args.out}")
    return EXIT_OK


def _cmd_extract(args) -> int:
    settings = PipelineSettings(bins=args.bins, contrast=args.contrast)
    manifest = DatasetManifest(args.normal, args.sick)
    samples = do_extract(manifest, args.out, settings, args.norm_from, args.dump_histograms)
    print(f"wrote {len(samples)} feature vector(s) (k={len(samples[0].features)}) to {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    report_path = args.report if args.report is not None else Path(str(args.out) + ".report.txt")
    do_train(args.features, args.out, args.epochs, args.lr, args.seed, args.clusters, report_path)
    return EXIT_OK


def _cmd_test(args) -> int:
    do_test(args.model, args.features, args.out)
    return EXIT_OK


def _cmd_run(args) -> int:
    spec = SyntheticSpec(args.count_normal, args.count_sick, args.width, args.height, args.seed)
    settings = PipelineSettings(bins=args.bins, contrast=args.contrast)
    do_run(args.out, args.seed, spec, settings, args.epochs, args.lr, args.test_fraction)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
